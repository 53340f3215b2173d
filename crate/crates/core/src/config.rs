use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gbt::LossKind;

/// Stop when the training loss improves by less than `tolerance` for
/// `patience` consecutive rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStopping {
    pub tolerance: f64,
    pub patience: usize,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        EarlyStopping {
            tolerance: 1e-6,
            patience: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Global histogram error budget; `1 / epsilon_global` is the global bin count.
    pub epsilon_global: f64,
    pub max_rounds: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_gain: f64,
    pub loss: LossKind,
    /// Parties evaluate the broadcast model on bin representatives rather
    /// than on their raw feature values.
    pub quantize_predict: bool,
    pub early_stopping: Option<EarlyStopping>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epsilon_global: 1.0 / 255.0,
            max_rounds: 100,
            lambda: 1.0,
            gamma: 0.0,
            learning_rate: 0.3,
            max_depth: 6,
            min_gain: 0.0,
            loss: LossKind::BinaryLogistic,
            quantize_predict: true,
            early_stopping: None,
        }
    }
}

impl TrainingConfig {
    pub fn with_bins(mut self, bins: usize) -> Self {
        self.epsilon_global = 1.0 / bins as f64;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.epsilon_global > 0.0 && self.epsilon_global <= 1.0) {
            return bad(format!(
                "epsilon_global must lie in (0, 1], got {}",
                self.epsilon_global
            ));
        }
        if !(self.lambda >= 0.0) {
            return bad(format!("lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.gamma >= 0.0) {
            return bad(format!("gamma must be >= 0, got {}", self.gamma));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad(format!("learning_rate must lie in (0, 1], got {}", self.learning_rate));
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive".into());
        }
        if self.min_gain.is_nan() {
            return bad("min_gain must be a number".into());
        }
        if let Some(es) = self.early_stopping {
            if es.patience == 0 || !(es.tolerance >= 0.0) {
                return bad("early stopping needs patience >= 1 and tolerance >= 0".into());
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = TrainingConfig::default();
        c.validate().unwrap();
        assert_eq!((1.0 / c.epsilon_global).floor(), 255.0);
    }

    #[test]
    fn rejects_out_of_range_values() {
        let base = TrainingConfig::default();
        for c in [
            TrainingConfig {
                epsilon_global: 0.0,
                ..base.clone()
            },
            TrainingConfig {
                epsilon_global: 1.5,
                ..base.clone()
            },
            TrainingConfig {
                lambda: -1.0,
                ..base.clone()
            },
            TrainingConfig {
                learning_rate: 0.0,
                ..base.clone()
            },
            TrainingConfig {
                max_depth: 0,
                ..base.clone()
            },
        ] {
            assert!(matches!(c.validate(), Err(Error::Config(_))));
        }
    }
}
