//! Surrogate histograms, per-bin gradient statistics, and their fusion at the
//! aggregator.
//!
//! A party quantizes each feature with its own quantile sketch. Besides the
//! per-feature bucket sums it reports "cells": groups of samples that share a
//! bin in every feature, with their summed statistics. Cells are the
//! quantized rows of the party's data and let the aggregator partition
//! gradient mass down a tree of any depth without seeing a single sample.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{is_missing, Dataset};
use crate::error::{Error, Result};
use crate::gbt::{grad_hess, BinnedRow, Ensemble, FeatureBuckets, GradHessSum, LossKind};
use crate::sketch::{BinEdges, QuantileSketch};

/// Relative tolerance for treating `1 / epsilon` as an integer. Budgets like
/// `(1/255) * (1000/3000)` should give 765 bins, not 764.
const BIN_COUNT_SNAP: f64 = 1e-12;

/// Sketches are kept this many times finer than the bin width. A GK summary
/// compressed to `epsilon` spaces its entries up to `2 * epsilon * n` ranks
/// apart, too coarse to place `1 / epsilon` distinct boundaries.
pub const SKETCH_REFINEMENT: f64 = 4.0;

/// `max(1, floor(1 / epsilon))`, robust to rounding in `epsilon`.
pub fn n_bins_for_epsilon(epsilon: f64) -> usize {
    let inv = 1.0 / epsilon;
    let nearest = inv.round();
    let bins = if (inv - nearest).abs() <= BIN_COUNT_SNAP * nearest {
        nearest
    } else {
        inv.floor()
    };
    (bins as usize).max(1)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "epsilon must lie in (0, 1], got {epsilon}"
        )))
    }
}

/// One feature's bins. `edges` is `None` when the feature was missing in every
/// sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHistogram {
    pub edges: Option<BinEdges>,
    pub representatives: Vec<f64>,
    pub counts: Vec<u64>,
    pub missing_count: u64,
    pub sketch: Option<QuantileSketch>,
}

impl FeatureHistogram {
    pub fn n_bins(&self) -> usize {
        self.representatives.len()
    }

    pub fn bin_of(&self, x: f64) -> Option<u32> {
        if is_missing(x) {
            return None;
        }
        self.edges.as_ref().map(|e| e.bin_of(x) as u32)
    }

    /// Split thresholds: the upper boundary of every bin.
    pub fn thresholds(&self) -> Vec<f64> {
        self.edges.as_ref().map_or_else(Vec::new, |e| e.uppers().to_vec())
    }

    fn from_edges(
        edges: Option<BinEdges>,
        counts: Vec<u64>,
        missing_count: u64,
        sketch: Option<QuantileSketch>,
    ) -> Self {
        let representatives = edges
            .as_ref()
            .map_or_else(Vec::new, |e| (0..e.n_bins()).map(|b| e.midpoint(b)).collect());
        FeatureHistogram {
            edges,
            representatives,
            counts,
            missing_count,
            sketch,
        }
    }
}

/// A party's quantized view of its data: bin layout and representatives for
/// every feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateHistogram {
    pub epsilon: f64,
    pub n_rows: u64,
    pub features: Vec<FeatureHistogram>,
}

impl SurrogateHistogram {
    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn thresholds(&self) -> Vec<Vec<f64>> {
        self.features.iter().map(FeatureHistogram::thresholds).collect()
    }

    /// Groups the rows of `data` by their bin in every feature.
    pub fn quantize(&self, data: &Dataset) -> Result<QuantizedRows> {
        if data.n_features() != self.n_features() {
            return Err(Error::Structural(format!(
                "histogram has {} features, data has {}",
                self.n_features(),
                data.n_features()
            )));
        }
        let mut groups: BTreeMap<Vec<Option<u32>>, Vec<usize>> = BTreeMap::new();
        for (i, row) in data.rows().enumerate() {
            let key: Vec<Option<u32>> = self.features.iter().zip(row).map(|(fh, &x)| fh.bin_of(x)).collect();
            groups.entry(key).or_default().push(i);
        }
        let mut out = QuantizedRows {
            keys: Vec::with_capacity(groups.len()),
            representatives: Vec::with_capacity(groups.len()),
            members: Vec::with_capacity(groups.len()),
        };
        for (key, members) in groups {
            let reps = key
                .iter()
                .zip(&self.features)
                .map(|(b, fh)| b.map_or(f64::NAN, |b| fh.representatives[b as usize]))
                .collect();
            out.keys.push(key);
            out.representatives.push(reps);
            out.members.push(members);
        }
        Ok(out)
    }
}

/// Rows grouped by bin key, with the representative vector of each key.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedRows {
    pub keys: Vec<Vec<Option<u32>>>,
    pub representatives: Vec<Vec<f64>>,
    pub members: Vec<Vec<usize>>,
}

impl QuantizedRows {
    pub fn n_cells(&self) -> usize {
        self.keys.len()
    }
}

/// Builds a party's surrogate histogram with `max(1, floor(1 / epsilon))`
/// bins per feature. Missing values are counted, never sketched.
pub fn compute_histogram(data: &Dataset, epsilon: f64) -> Result<SurrogateHistogram> {
    check_epsilon(epsilon)?;
    let n_bins = n_bins_for_epsilon(epsilon);
    let mut features = Vec::with_capacity(data.n_features());
    for f in 0..data.n_features() {
        let mut sketch = QuantileSketch::new(epsilon / SKETCH_REFINEMENT)?;
        let mut missing = 0u64;
        for x in data.column(f) {
            if is_missing(x) {
                missing += 1;
            } else {
                sketch.insert(x)?;
            }
        }
        if sketch.is_empty() {
            features.push(FeatureHistogram::from_edges(None, Vec::new(), missing, None));
            continue;
        }
        let edges = sketch.extract_bins(n_bins)?;
        let mut counts = vec![0u64; edges.n_bins()];
        for x in data.column(f).filter(|x| !is_missing(*x)) {
            counts[edges.bin_of(x)] += 1;
        }
        features.push(FeatureHistogram::from_edges(Some(edges), counts, missing, Some(sketch)));
    }
    Ok(SurrogateHistogram {
        epsilon,
        n_rows: data.n_rows() as u64,
        features,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Party(usize),
    Merged,
}

/// Gradient statistics over a histogram's bins, per feature and per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradHessBuckets {
    pub provenance: Provenance,
    pub features: Vec<FeatureBuckets>,
    pub cells: Vec<BinnedRow>,
    /// Training loss of the evaluated model summed over the rows.
    pub loss_sum: f64,
}

impl GradHessBuckets {
    pub fn total(&self) -> GradHessSum {
        self.cells.iter().map(|c| c.stats).sum()
    }
}

/// Evaluates `model` on a party's rows and sums gradients and hessians into
/// the histogram's bins.
///
/// With `quantize` set, each row is predicted from its bin representatives;
/// otherwise from its raw feature values. The result is tagged as party 0;
/// use [`bucket_quantized`] to set the provenance.
pub fn bucket_grad_hess(
    hist: &SurrogateHistogram,
    data: &Dataset,
    model: &Ensemble,
    quantize: bool,
) -> Result<GradHessBuckets> {
    let rows = hist.quantize(data)?;
    bucket_quantized(hist, &rows, data, model, quantize, Provenance::Party(0))
}

/// [`bucket_grad_hess`] over rows already grouped by [`SurrogateHistogram::quantize`].
pub fn bucket_quantized(
    hist: &SurrogateHistogram,
    rows: &QuantizedRows,
    data: &Dataset,
    model: &Ensemble,
    quantize: bool,
    provenance: Provenance,
) -> Result<GradHessBuckets> {
    if model.n_features != hist.n_features() {
        return Err(Error::Structural(format!(
            "model has {} features, histogram has {}",
            model.n_features,
            hist.n_features()
        )));
    }
    let shared: Vec<f64> = if quantize {
        rows.representatives
            .iter()
            .map(|r| model.predict_unchecked(r))
            .collect()
    } else {
        Vec::new()
    };
    accumulate(hist, rows, data, model.loss, provenance, |cell, row| {
        if quantize {
            shared[cell]
        } else {
            model.predict_unchecked(data.row(row))
        }
    })
}

/// Sums gradient statistics per bin and per cell given the raw score of each
/// row (`raw(cell, row)`).
pub(crate) fn accumulate(
    hist: &SurrogateHistogram,
    rows: &QuantizedRows,
    data: &Dataset,
    loss: LossKind,
    provenance: Provenance,
    raw: impl Fn(usize, usize) -> f64,
) -> Result<GradHessBuckets> {
    let mut features: Vec<FeatureBuckets> = hist
        .features
        .iter()
        .map(|fh| FeatureBuckets::zeros(fh.n_bins()))
        .collect();
    let mut cells = Vec::with_capacity(rows.n_cells());
    let mut loss_sum = 0.0;
    for (c, (key, members)) in rows.keys.iter().zip(&rows.members).enumerate() {
        let mut stats = GradHessSum::default();
        for &i in members {
            let score = raw(c, i);
            let y = data.label(i);
            let gh = grad_hess(loss, y, score)?;
            loss_sum += loss.loss(y, score);
            stats += GradHessSum::new(gh.g, gh.h, 1);
        }
        for (fb, bin) in features.iter_mut().zip(key) {
            match bin {
                Some(b) => fb.bins[*b as usize] += stats,
                None => fb.missing += stats,
            }
        }
        cells.push(BinnedRow {
            bins: key.clone(),
            stats,
        });
    }
    Ok(GradHessBuckets {
        provenance,
        features,
        cells,
        loss_sum,
    })
}

/// Merge resolution: the finest party epsilon for classification, the
/// coarsest for regression.
pub fn select_merge_epsilon(party_epsilons: &[f64], loss: LossKind) -> Result<f64> {
    if party_epsilons.is_empty() {
        return Err(Error::Protocol("no party epsilons to select from".into()));
    }
    let pick = match loss {
        LossKind::BinaryLogistic => f64::min,
        LossKind::SquaredError => f64::max,
    };
    Ok(party_epsilons[1..].iter().copied().fold(party_epsilons[0], pick))
}

/// The merged bin layout and, for every party bin, the merged bin that
/// receives its mass.
///
/// Histograms never change after round 1, so the aggregator builds this once
/// and reuses it to fuse every round's buckets.
#[derive(Debug, Clone, PartialEq)]
pub struct MergeLayout {
    pub merged: SurrogateHistogram,
    /// `bin_map[party][feature][party_bin]`
    pub bin_map: Vec<Vec<Vec<u32>>>,
}

impl MergeLayout {
    pub fn build(party_hists: &[&SurrogateHistogram], epsilon_m: f64) -> Result<Self> {
        check_epsilon(epsilon_m)?;
        let Some(first) = party_hists.first() else {
            return Err(Error::Protocol("no party histograms to merge".into()));
        };
        let n_features = first.n_features();
        if party_hists.iter().any(|h| h.n_features() != n_features) {
            return Err(Error::Protocol(
                "party histograms disagree on the feature schema".into(),
            ));
        }
        let n_bins = n_bins_for_epsilon(epsilon_m);
        let mut bin_map: Vec<Vec<Vec<u32>>> = vec![Vec::with_capacity(n_features); party_hists.len()];
        let mut features = Vec::with_capacity(n_features);
        for f in 0..n_features {
            let parts: Vec<&FeatureHistogram> = party_hists.iter().map(|h| &h.features[f]).collect();
            let missing: u64 = parts.iter().map(|p| p.missing_count).sum();
            let sketches: Vec<&QuantileSketch> = parts.iter().filter_map(|p| p.sketch.as_ref()).collect();
            if sketches.is_empty() {
                for m in bin_map.iter_mut() {
                    m.push(Vec::new());
                }
                features.push(FeatureHistogram::from_edges(None, Vec::new(), missing, None));
                continue;
            }
            let sketch = QuantileSketch::merge(&sketches, epsilon_m / SKETCH_REFINEMENT)?;
            let edges = sketch.extract_bins(n_bins)?;
            let mut counts = vec![0u64; edges.n_bins()];
            for (p, part) in parts.iter().enumerate() {
                let map: Vec<u32> = part.representatives.iter().map(|&r| edges.bin_of(r) as u32).collect();
                for (b, &m) in map.iter().enumerate() {
                    counts[m as usize] += part.counts[b];
                }
                bin_map[p].push(map);
            }
            features.push(FeatureHistogram::from_edges(Some(edges), counts, missing, Some(sketch)));
        }
        let merged = SurrogateHistogram {
            epsilon: epsilon_m,
            n_rows: party_hists.iter().map(|h| h.n_rows).sum(),
            features,
        };
        Ok(MergeLayout { merged, bin_map })
    }

    /// Sums party buckets into the merged bins, in roster order.
    pub fn fuse(&self, party_buckets: &[&GradHessBuckets]) -> Result<GradHessBuckets> {
        if party_buckets.len() != self.bin_map.len() {
            return Err(Error::Protocol(format!(
                "{} bucket sets for {} parties",
                party_buckets.len(),
                self.bin_map.len()
            )));
        }
        let mut features: Vec<FeatureBuckets> = self
            .merged
            .features
            .iter()
            .map(|fh| FeatureBuckets::zeros(fh.n_bins()))
            .collect();
        let mut cells: BTreeMap<Vec<Option<u32>>, GradHessSum> = BTreeMap::new();
        let mut loss_sum = 0.0;
        for (p, buckets) in party_buckets.iter().enumerate() {
            let map = &self.bin_map[p];
            let schema_ok = buckets.features.len() == map.len()
                && buckets.features.iter().zip(map).all(|(fb, m)| fb.bins.len() == m.len());
            if !schema_ok {
                return Err(Error::Protocol(format!("party {p} buckets do not match its histogram")));
            }
            for ((fb, m), out) in buckets.features.iter().zip(map).zip(features.iter_mut()) {
                for (stats, &target) in fb.bins.iter().zip(m) {
                    out.bins[target as usize] += *stats;
                }
                out.missing += fb.missing;
            }
            for cell in &buckets.cells {
                if cell.bins.len() != map.len() {
                    return Err(Error::Protocol(format!("party {p} sent a malformed cell")));
                }
                let key = cell
                    .bins
                    .iter()
                    .zip(map)
                    .map(|(b, m)| match b {
                        Some(b) => m
                            .get(*b as usize)
                            .copied()
                            .map(Some)
                            .ok_or_else(|| Error::Protocol(format!("party {p} cell bin {b} out of range"))),
                        None => Ok(None),
                    })
                    .collect::<Result<Vec<_>>>()?;
                *cells.entry(key).or_default() += cell.stats;
            }
            loss_sum += buckets.loss_sum;
        }
        Ok(GradHessBuckets {
            provenance: Provenance::Merged,
            features,
            cells: cells
                .into_iter()
                .map(|(bins, stats)| BinnedRow { bins, stats })
                .collect(),
            loss_sum,
        })
    }
}

/// Fuses party histograms and buckets at resolution `epsilon_m`.
pub fn merge_hist(
    party_buckets: &[&GradHessBuckets],
    party_hists: &[&SurrogateHistogram],
    epsilon_m: f64,
) -> Result<(SurrogateHistogram, GradHessBuckets)> {
    let layout = MergeLayout::build(party_hists, epsilon_m)?;
    let buckets = layout.fuse(party_buckets)?;
    Ok((layout.merged, buckets))
}
