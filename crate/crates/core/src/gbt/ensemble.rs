use serde::{Deserialize, Serialize};

use super::loss::{sigmoid, LossKind};
use super::tree::Tree;
use crate::error::{Error, Result};

/// Additive tree model. Raw score is `base_score + learning_rate * sum(tree(x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub loss: LossKind,
    pub base_score: f64,
    pub learning_rate: f64,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl Ensemble {
    /// The null model: no trees, raw score zero everywhere.
    pub fn null(loss: LossKind, learning_rate: f64, n_features: usize) -> Self {
        Ensemble {
            loss,
            base_score: 0.0,
            learning_rate,
            n_features,
            trees: Vec::new(),
        }
    }

    pub fn push(&mut self, tree: Tree) -> Result<()> {
        if let Some(f) = tree.max_feature() {
            if f >= self.n_features {
                return Err(Error::Structural(format!(
                    "tree splits on feature {f} but the model has {} features",
                    self.n_features
                )));
            }
        }
        self.trees.push(tree);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.n_features {
            return Err(Error::Dimension {
                expected: self.n_features,
                actual: features.len(),
            });
        }
        Ok(self.predict_unchecked(features))
    }

    pub(crate) fn predict_unchecked(&self, features: &[f64]) -> f64 {
        let sum = self.trees.iter().fold(0.0, |acc, t| acc + t.predict(features));
        self.base_score + self.learning_rate * sum
    }

    pub fn predict_proba(&self, features: &[f64]) -> Result<f64> {
        self.predict(features).map(sigmoid)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: Ensemble = serde_json::from_str(s)?;
        for tree in &model.trees {
            if tree.max_feature().is_some_and(|f| f >= model.n_features) {
                return Err(Error::Structural(
                    "tree references a feature outside the model schema".into(),
                ));
            }
        }
        Ok(model)
    }
}
