//! Federated gradient-boosted trees trained from party-adaptive surrogate
//! histograms.
//!
//! Each party summarizes its local features with a quantile sketch whose
//! error bound scales with the party's share of the federation's data, and
//! sends only bin representatives and per-bin gradient statistics to the
//! aggregator. The aggregator fuses the histograms at a loss-dependent
//! resolution and grows one tree per round.

pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gbt;
pub mod histogram;
pub mod metrics;
pub mod protocol;
pub mod sketch;

pub use config::{EarlyStopping, TrainingConfig};
pub use data::Dataset;
pub use error::{Error, Result};
pub use gbt::{Ensemble, LossKind, Tree};
pub use histogram::{GradHessBuckets, SurrogateHistogram};
pub use protocol::{compute_local_epsilon, run_training, TrainingOutcome};
pub use sketch::QuantileSketch;
