//! Centralized second-order boosting math: objectives, split scoring, tree
//! growth and ensemble prediction.

mod ensemble;
mod grow;
mod loss;
mod split;
mod tree;

pub use ensemble::Ensemble;
pub use grow::{build_buckets, grow_tree, BinnedRow};
pub use loss::{grad_hess, sigmoid, GradHessPair, LossKind};
pub use split::{find_best_split, leaf_weight, split_gain, FeatureBuckets, GradHessSum, SplitCandidate};
pub use tree::{Direction, Node, NodeId, Tree};
