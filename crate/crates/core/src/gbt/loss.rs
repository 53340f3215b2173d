//! Training objectives and their first/second derivatives with respect to the
//! raw (pre-link) score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    /// Cross-entropy of `sigmoid(raw)` against labels in {0, 1}.
    #[serde(rename = "logistic")]
    BinaryLogistic,
    /// `0.5 * (raw - y)^2`.
    #[serde(rename = "squared")]
    SquaredError,
}

impl LossKind {
    pub fn is_classification(self) -> bool {
        matches!(self, LossKind::BinaryLogistic)
    }

    pub fn validate_label(self, y: f64) -> Result<()> {
        match self {
            LossKind::BinaryLogistic if y == 0.0 || y == 1.0 => Ok(()),
            LossKind::BinaryLogistic => Err(Error::Label(y)),
            LossKind::SquaredError if y.is_finite() => Ok(()),
            LossKind::SquaredError => Err(Error::InvalidInput(format!(
                "squared error requires a finite label, got {y}"
            ))),
        }
    }

    /// Per-sample loss at raw score `raw`.
    pub fn loss(self, y: f64, raw: f64) -> f64 {
        match self {
            // log(1 + e^raw) - y * raw, written to avoid overflow for large |raw|.
            LossKind::BinaryLogistic => raw.max(0.0) - y * raw + (-raw.abs()).exp().ln_1p(),
            LossKind::SquaredError => 0.5 * (raw - y) * (raw - y),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "logistic" | "binary:logistic" => Some(LossKind::BinaryLogistic),
            "squared" | "reg:squarederror" => Some(LossKind::SquaredError),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossKind::BinaryLogistic => "logistic",
            LossKind::SquaredError => "squared",
        }
    }
}

/// First- and second-order derivative of the loss for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradHessPair {
    pub g: f64,
    pub h: f64,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn grad_hess(loss: LossKind, y: f64, raw: f64) -> Result<GradHessPair> {
    loss.validate_label(y)?;
    Ok(match loss {
        LossKind::SquaredError => GradHessPair { g: raw - y, h: 1.0 },
        LossKind::BinaryLogistic => {
            // 1 - p is taken as sigmoid(-raw) so h stays positive for large |raw|.
            let p = sigmoid(raw);
            let q = sigmoid(-raw);
            let g = if y == 1.0 { -q } else { p };
            GradHessPair { g, h: p * q }
        }
    })
}
