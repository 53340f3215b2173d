use serde::{Deserialize, Serialize};

use super::split::{find_best_split, leaf_weight, FeatureBuckets, GradHessSum};
use super::tree::{Direction, Node, Tree};
use crate::config::TrainingConfig;
use crate::error::{Error, Result};

/// A group of samples sharing the same bin in every feature, with their
/// summed statistics. `None` marks a missing feature value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedRow {
    pub bins: Vec<Option<u32>>,
    pub stats: GradHessSum,
}

/// Per-feature histograms over a subset of rows.
pub fn build_buckets(rows: &[BinnedRow], members: &[u32], n_bins: &[usize]) -> Vec<FeatureBuckets> {
    let mut out: Vec<FeatureBuckets> = n_bins.iter().map(|&n| FeatureBuckets::zeros(n)).collect();
    for &r in members {
        let row = &rows[r as usize];
        for (fb, bin) in out.iter_mut().zip(&row.bins) {
            match bin {
                Some(b) => fb.bins[*b as usize] += row.stats,
                None => fb.missing += row.stats,
            }
        }
    }
    out
}

/// Grows one tree level by level over binned rows.
///
/// `thresholds[f][b]` is the upper boundary of bin `b` of feature `f`; a row
/// in bin `b` goes left of a split at bin `s` iff `b <= s`. A node becomes a
/// leaf at `max_depth` or when no split beats `min_gain`.
pub fn grow_tree(thresholds: &[Vec<f64>], rows: &[BinnedRow], config: &TrainingConfig) -> Result<Tree> {
    if rows.is_empty() {
        return Err(Error::Structural("cannot grow a tree without rows".into()));
    }
    let n_features = thresholds.len();
    if let Some(bad) = rows.iter().find(|r| r.bins.len() != n_features) {
        return Err(Error::Dimension {
            expected: n_features,
            actual: bad.bins.len(),
        });
    }
    let n_bins: Vec<usize> = thresholds.iter().map(Vec::len).collect();
    for row in rows {
        for (f, b) in row.bins.iter().enumerate() {
            if b.is_some_and(|b| b as usize >= n_bins[f]) {
                return Err(Error::Structural(format!(
                    "row references bin {} of feature {f} which has {} bins",
                    b.unwrap(),
                    n_bins[f]
                )));
            }
        }
    }

    let mut nodes: Vec<Option<Node>> = vec![None];
    let mut frontier: Vec<(usize, Vec<u32>)> = vec![(0, (0..rows.len() as u32).collect())];
    let mut depth = 0;
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for (id, members) in frontier {
            let total: GradHessSum = members.iter().map(|&r| rows[r as usize].stats).sum();
            let split = if depth < config.max_depth && n_features > 0 {
                let buckets = build_buckets(rows, &members, &n_bins);
                find_best_split(&buckets, thresholds, config.lambda, config.gamma, config.min_gain)?
            } else {
                None
            };
            match split {
                Some(s) => {
                    let (left, right): (Vec<u32>, Vec<u32>) =
                        members.iter().partition(|&&r| match rows[r as usize].bins[s.feature] {
                            Some(b) => b as usize <= s.bin,
                            None => s.default == Direction::Left,
                        });
                    let (l, r) = (nodes.len(), nodes.len() + 1);
                    nodes.push(None);
                    nodes.push(None);
                    nodes[id] = Some(Node::Internal {
                        feature: s.feature,
                        threshold: s.threshold,
                        default: s.default,
                        left: l,
                        right: r,
                    });
                    next.push((l, left));
                    next.push((r, right));
                }
                None => {
                    let weight = leaf_weight(total.g, total.h, config.lambda).unwrap_or(0.0);
                    nodes[id] = Some(Node::Leaf { weight });
                }
            }
        }
        frontier = next;
        depth += 1;
    }
    Tree::from_nodes(nodes.into_iter().map(|n| n.expect("every node is resolved")).collect())
}
