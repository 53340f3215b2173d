//! Leaf weights, split gain and the histogram split scan.

use std::ops::{Add, AddAssign, Sub};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::Direction;
use crate::error::{Error, Result};

/// Summed gradient, hessian and sample count of a set of samples.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GradHessSum {
    pub g: f64,
    pub h: f64,
    pub count: u64,
}

impl GradHessSum {
    pub fn new(g: f64, h: f64, count: u64) -> Self {
        GradHessSum { g, h, count }
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

impl Add for GradHessSum {
    type Output = GradHessSum;

    fn add(self, rhs: Self) -> Self {
        GradHessSum {
            g: self.g + rhs.g,
            h: self.h + rhs.h,
            count: self.count + rhs.count,
        }
    }
}

impl AddAssign for GradHessSum {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for GradHessSum {
    type Output = GradHessSum;

    fn sub(self, rhs: Self) -> Self {
        GradHessSum {
            g: self.g - rhs.g,
            h: self.h - rhs.h,
            count: self.count - rhs.count,
        }
    }
}

impl std::iter::Sum for GradHessSum {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(GradHessSum::default(), |a, b| a + b)
    }
}

/// Per-bin statistics of one feature plus the mass of samples missing it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureBuckets {
    pub bins: Vec<GradHessSum>,
    pub missing: GradHessSum,
}

impl FeatureBuckets {
    pub fn zeros(n_bins: usize) -> Self {
        FeatureBuckets {
            bins: vec![GradHessSum::default(); n_bins],
            missing: GradHessSum::default(),
        }
    }

    pub fn total(&self) -> GradHessSum {
        self.bins.iter().copied().sum::<GradHessSum>() + self.missing
    }
}

/// Optimal leaf value `-G / (H + lambda)`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> Result<f64> {
    let denom = h + lambda;
    if denom <= 0.0 || denom.is_nan() {
        return Err(Error::DegenerateLeaf { hessian: h, lambda });
    }
    Ok(-g / denom)
}

pub fn split_gain(gl: f64, hl: f64, gr: f64, hr: f64, lambda: f64, gamma: f64) -> f64 {
    let score = |g: f64, h: f64| g * g / (h + lambda);
    0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma
}

/// The best split found by [`find_best_split`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    /// Index of the last bin sent left.
    pub bin: usize,
    pub threshold: f64,
    pub gain: f64,
    pub default: Direction,
}

/// Scans every feature's bins left to right and returns the split with the
/// largest gain if it exceeds `min_gain`.
///
/// `thresholds[f][b]` is the upper boundary of bin `b` of feature `f`. Missing
/// mass is tried on both sides; ties prefer sending it left. Ties in gain go
/// to the lowest feature index and then the lowest threshold.
pub fn find_best_split(
    buckets: &[FeatureBuckets],
    thresholds: &[Vec<f64>],
    lambda: f64,
    gamma: f64,
    min_gain: f64,
) -> Result<Option<SplitCandidate>> {
    if buckets.is_empty() {
        return Err(Error::Structural("no feature buckets to split".into()));
    }
    if thresholds.len() != buckets.len() {
        return Err(Error::Structural(format!(
            "{} threshold lists for {} features",
            thresholds.len(),
            buckets.len()
        )));
    }
    for (feature, (fb, thr)) in buckets.iter().zip(thresholds).enumerate() {
        if fb.bins.len() != thr.len() {
            return Err(Error::Structural(format!(
                "feature {feature} has {} bins but {} thresholds",
                fb.bins.len(),
                thr.len()
            )));
        }
    }
    let per_feature: Vec<Option<SplitCandidate>> = buckets
        .par_iter()
        .zip(thresholds)
        .enumerate()
        .map(|(feature, (fb, thr))| best_split_for_feature(feature, fb, thr, lambda, gamma))
        .collect();
    // Reduce in feature order so ties resolve the same way on every run.
    let mut best: Option<SplitCandidate> = None;
    for c in per_feature.into_iter().flatten() {
        if best.is_none_or(|b| c.gain > b.gain) {
            best = Some(c);
        }
    }
    Ok(best.filter(|b| b.gain > min_gain))
}

fn best_split_for_feature(
    feature: usize,
    fb: &FeatureBuckets,
    thresholds: &[f64],
    lambda: f64,
    gamma: f64,
) -> Option<SplitCandidate> {
    let present: GradHessSum = fb.bins.iter().copied().sum();
    let missing = fb.missing;
    let mut best: Option<SplitCandidate> = None;
    let mut left = GradHessSum::default();
    for (bin, stats) in fb.bins.iter().enumerate().take(fb.bins.len().saturating_sub(1)) {
        if stats.count == 0 && bin > 0 {
            // Same partition as the previous boundary; ties keep the lower one.
            continue;
        }
        left += *stats;
        let right = present - left;
        for default in [Direction::Left, Direction::Right] {
            let (l, r) = match default {
                Direction::Left => (left + missing, right),
                Direction::Right => (left, right + missing),
            };
            if l.count == 0 || r.count == 0 || l.h + lambda <= 0.0 || r.h + lambda <= 0.0 {
                continue;
            }
            let gain = split_gain(l.g, l.h, r.g, r.h, lambda, gamma);
            if best.is_none_or(|b| gain > b.gain) {
                best = Some(SplitCandidate {
                    feature,
                    bin,
                    threshold: thresholds[bin],
                    gain,
                    default,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bins(stats: &[(f64, f64, u64)]) -> FeatureBuckets {
        FeatureBuckets {
            bins: stats.iter().map(|&(g, h, c)| GradHessSum::new(g, h, c)).collect(),
            missing: GradHessSum::default(),
        }
    }

    #[test]
    fn leaf_weight_examples() {
        assert_eq!(leaf_weight(0.0, 5.0, 1.0).unwrap(), 0.0);
        assert_eq!(leaf_weight(2.0, 3.0, 1.0).unwrap(), -0.5);
        assert_eq!(leaf_weight(-4.0, 0.0, 2.0).unwrap(), 2.0);
        assert!(matches!(leaf_weight(1.0, 0.0, 0.0), Err(Error::DegenerateLeaf { .. })));
    }

    #[test]
    fn split_gain_examples() {
        assert_eq!(split_gain(0.0, 3.0, 0.0, 2.0, 1.0, 0.1), -0.1);
        assert_eq!(split_gain(1.0, 1.0, -1.0, 1.0, 0.0, 0.0), 1.0);
        let g = split_gain(2.0, 1.0, 2.0, 1.0, 1.0, 0.0);
        assert!((g - (-2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn two_bins_split_between_them() {
        let fb = bins(&[(1.0, 1.0, 1), (-1.0, 1.0, 1)]);
        let s = find_best_split(&[fb], &[vec![0.5, 2.0]], 0.0, 0.0, 0.0)
            .unwrap()
            .unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 0.5);
        assert_eq!(s.gain, 1.0);
    }

    #[test]
    fn zero_gradients_give_no_split() {
        let fb = bins(&[(0.0, 1.0, 3), (0.0, 2.0, 1), (0.0, 1.0, 2)]);
        let s = find_best_split(&[fb], &[vec![1.0, 2.0, 3.0]], 1.0, 0.0, 0.0).unwrap();
        assert!(s.is_none());
    }

    #[test]
    fn empty_buckets_are_structural_errors() {
        assert!(matches!(
            find_best_split(&[], &[], 1.0, 0.0, 0.0),
            Err(Error::Structural(_))
        ));
        let fb = bins(&[(1.0, 1.0, 1)]);
        assert!(find_best_split(&[fb], &[vec![]], 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn ties_prefer_lowest_feature_and_threshold() {
        let fb = bins(&[(1.0, 1.0, 1), (-1.0, 1.0, 1)]);
        let thr = vec![0.0, 1.0];
        let s = find_best_split(&[fb.clone(), fb], &[thr.clone(), thr], 0.0, 0.0, 0.0)
            .unwrap()
            .unwrap();
        assert_eq!(s.feature, 0);

        // An empty middle bin yields two candidates with the same partition.
        let fb = bins(&[(1.0, 1.0, 1), (0.0, 0.0, 0), (-1.0, 1.0, 1)]);
        let s = find_best_split(&[fb], &[vec![0.0, 1.0, 2.0]], 0.0, 0.0, 0.0)
            .unwrap()
            .unwrap();
        assert_eq!(s.bin, 0);
    }

    #[test]
    fn missing_mass_picks_the_better_side() {
        let mut fb = bins(&[(2.0, 1.0, 2), (-2.0, 1.0, 2)]);
        fb.missing = GradHessSum::new(-3.0, 1.0, 3);
        let s = find_best_split(&[fb], &[vec![0.0, 1.0]], 1.0, 0.0, 0.0)
            .unwrap()
            .unwrap();
        assert_eq!(s.default, Direction::Right);

        let mut fb = bins(&[(2.0, 1.0, 2), (-2.0, 1.0, 2)]);
        fb.missing = GradHessSum::new(3.0, 1.0, 3);
        let s = find_best_split(&[fb], &[vec![0.0, 1.0]], 1.0, 0.0, 0.0)
            .unwrap()
            .unwrap();
        assert_eq!(s.default, Direction::Left);
    }

    #[test]
    fn min_gain_filters_weak_splits() {
        let fb = bins(&[(1.0, 1.0, 1), (-1.0, 1.0, 1)]);
        assert!(find_best_split(&[fb], &[vec![0.0, 1.0]], 0.0, 0.0, 1.0)
            .unwrap()
            .is_none());
    }
}
