//! Classification and regression metrics and the experiment report rows.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub acc: f64,
    pub pre: f64,
    pub rec: f64,
    pub f1: f64,
    /// `None` when the labels hold a single class.
    pub auc: Option<f64>,
}

fn check_inputs(scores: &[f64], labels: &[f64]) -> Result<()> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::Metrics(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::Metrics("scores contain NaN".into()));
    }
    Ok(())
}

fn check_binary(labels: &[f64]) -> Result<()> {
    match labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        Some(y) => Err(Error::Metrics(format!("label {y} is not 0 or 1"))),
        None => Ok(()),
    }
}

/// Threshold metrics plus AUC. A sample is predicted positive when its score
/// is strictly above `threshold`.
pub fn classification_metrics(scores: &[f64], labels: &[f64], threshold: f64) -> Result<ClassificationMetrics> {
    check_inputs(scores, labels)?;
    check_binary(labels)?;
    let (mut tp, mut fp, mut tn, mut fne) = (0u64, 0u64, 0u64, 0u64);
    for (&s, &y) in scores.iter().zip(labels) {
        match (s > threshold, y == 1.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fne += 1,
        }
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let pre = ratio(tp, tp + fp);
    let rec = ratio(tp, tp + fne);
    let f1 = if pre + rec == 0.0 {
        0.0
    } else {
        2.0 * pre * rec / (pre + rec)
    };
    let auc = match roc_auc(scores, labels) {
        Ok(a) => Some(a),
        Err(Error::Metrics(_)) if tp + fne == 0 || tn + fp == 0 => None,
        Err(e) => return Err(e),
    };
    Ok(ClassificationMetrics {
        acc: ratio(tp + tn, scores.len() as u64),
        pre,
        rec,
        f1,
        auc,
    })
}

/// Area under the ROC curve by trapezoidal integration over every distinct
/// score threshold. Tied scores form one step of the curve, so the result is
/// the Mann-Whitney statistic. All sums are kept in integers until the final
/// division.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_inputs(scores, labels)?;
    check_binary(labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let positives = labels.iter().filter(|&&y| y == 1.0).count() as u128;
    let negatives = labels.len() as u128 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::Metrics("AUC is undefined for a single class".into()));
    }
    let (mut tp, mut fp) = (0u128, 0u128);
    let mut twice_area = 0u128;
    let mut i = 0;
    while i < order.len() {
        let (tp0, fp0) = (tp, fp);
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] == 1.0 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += (fp - fp0) * (tp0 + tp);
    }
    Ok(twice_area as f64 / (2 * positives * negatives) as f64)
}

pub fn rmse(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    check_inputs(predictions, labels)?;
    let sse: f64 = predictions.iter().zip(labels).map(|(p, y)| (p - y) * (p - y)).sum();
    Ok((sse / labels.len() as f64).sqrt())
}

/// One report row: a party's evaluation, or the average over parties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// `None` on the averaged row.
    pub party: Option<usize>,
    pub n_train: usize,
    pub n_test: usize,
    pub acc: Option<f64>,
    pub pre: Option<f64>,
    pub rec: Option<f64>,
    pub auc: Option<f64>,
    pub f1: Option<f64>,
    pub rmse: Option<f64>,
}

impl MetricsRow {
    pub fn classification(party: usize, n_train: usize, n_test: usize, m: &ClassificationMetrics) -> Self {
        MetricsRow {
            party: Some(party),
            n_train,
            n_test,
            acc: Some(m.acc),
            pre: Some(m.pre),
            rec: Some(m.rec),
            auc: m.auc,
            f1: Some(m.f1),
            rmse: None,
        }
    }

    pub fn regression(party: usize, n_train: usize, n_test: usize, rmse: f64) -> Self {
        MetricsRow {
            party: Some(party),
            n_train,
            n_test,
            acc: None,
            pre: None,
            rec: None,
            auc: None,
            f1: None,
            rmse: Some(rmse),
        }
    }

    /// Arithmetic mean of every metric present in all rows. Sizes are summed.
    pub fn average(rows: &[MetricsRow]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Metrics("no rows to average".into()));
        }
        let mean = |get: fn(&MetricsRow) -> Option<f64>| -> Option<f64> {
            let vals: Option<Vec<f64>> = rows.iter().map(get).collect();
            vals.map(|v| v.iter().sum::<f64>() / v.len() as f64)
        };
        Ok(MetricsRow {
            party: None,
            n_train: rows.iter().map(|r| r.n_train).sum(),
            n_test: rows.iter().map(|r| r.n_test).sum(),
            acc: mean(|r| r.acc),
            pre: mean(|r| r.pre),
            rec: mean(|r| r.rec),
            auc: mean(|r| r.auc),
            f1: mean(|r| r.f1),
            rmse: mean(|r| r.rmse),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pairwise(scores: &[f64], labels: &[f64]) -> f64 {
        let (mut twice, mut pairs) = (0u128, 0u128);
        for (i, &yi) in labels.iter().enumerate() {
            for (j, &yj) in labels.iter().enumerate() {
                if yi == 1.0 && yj == 0.0 {
                    pairs += 1;
                    twice += if scores[i] > scores[j] {
                        2
                    } else if scores[i] == scores[j] {
                        1
                    } else {
                        0
                    };
                }
            }
        }
        twice as f64 / (2 * pairs) as f64
    }

    #[test]
    fn perfect_scores() {
        let m = classification_metrics(&[0.9, 0.8, 0.2, 0.1], &[1.0, 1.0, 0.0, 0.0], 0.5).unwrap();
        assert_eq!((m.acc, m.pre, m.rec, m.f1, m.auc), (1.0, 1.0, 1.0, 1.0, Some(1.0)));
    }

    #[test]
    fn two_point_roc() {
        let m = classification_metrics(&[0.9, 0.1], &[1.0, 0.0], 0.5).unwrap();
        assert_eq!(m.acc, 1.0);
        assert_eq!(m.auc, Some(1.0));
    }

    #[test]
    fn single_class_has_no_auc() {
        let m = classification_metrics(&[0.9, 0.1], &[1.0, 1.0], 0.5).unwrap();
        assert_eq!(m.auc, None);
        assert_eq!(m.acc, 0.5);
        assert!(roc_auc(&[0.9, 0.1], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn no_positive_predictions_give_zero_f1() {
        let m = classification_metrics(&[0.1, 0.2], &[1.0, 0.0], 0.5).unwrap();
        assert_eq!((m.pre, m.rec, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn random_scores_have_auc_near_half() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let scores: Vec<f64> = (0..20_000).map(|_| rng.random()).collect();
        let labels: Vec<f64> = (0..20_000).map(|_| rng.random_range(0..2) as f64).collect();
        let auc = roc_auc(&scores, &labels).unwrap();
        assert!((auc - 0.5).abs() < 0.05, "{auc}");
    }

    #[test]
    fn rmse_of_known_errors() {
        assert_eq!(rmse(&[1.0, 3.0], &[0.0, 0.0]).unwrap(), 5f64.sqrt());
    }

    #[test]
    fn averaging_rows() {
        let a = MetricsRow::classification(
            0,
            10,
            5,
            &ClassificationMetrics {
                acc: 0.5,
                pre: 1.0,
                rec: 0.2,
                f1: 0.1,
                auc: Some(0.7),
            },
        );
        let b = MetricsRow::classification(
            1,
            20,
            5,
            &ClassificationMetrics {
                acc: 0.7,
                pre: 0.0,
                rec: 0.4,
                f1: 0.3,
                auc: None,
            },
        );
        let avg = MetricsRow::average(&[a, b]).unwrap();
        assert!((avg.acc.unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(avg.auc, None);
        assert_eq!(avg.n_train, 30);
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise(data in prop::collection::vec((0u8..8, any::<bool>()), 2..120)) {
            let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 8.0).collect();
            let labels: Vec<f64> = data.iter().map(|(_, y)| *y as u8 as f64).collect();
            let has_both = labels.contains(&0.0) && labels.contains(&1.0);
            prop_assume!(has_both);
            prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), pairwise(&scores, &labels));
        }

        #[test]
        fn metrics_lie_in_unit_interval(data in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..80)) {
            let scores: Vec<f64> = data.iter().map(|d| d.0).collect();
            let labels: Vec<f64> = data.iter().map(|d| d.1 as u8 as f64).collect();
            let m = classification_metrics(&scores, &labels, 0.5).unwrap();
            for v in [m.acc, m.pre, m.rec, m.f1, m.auc.unwrap_or(0.5)] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
