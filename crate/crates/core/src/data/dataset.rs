use crate::error::{Error, Result};

/// Marker stored for a missing feature value.
pub const MISSING: f64 = f64::NAN;

pub fn is_missing(x: f64) -> bool {
    x.is_nan()
}

/// Dense row-major feature matrix with one label per row. Missing values are
/// stored as NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    values: Vec<f64>,
    labels: Vec<f64>,
    feature_names: Vec<String>,
    label_name: String,
    seed: Option<u64>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n_features = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::Structural(format!(
                    "row {i} has {} values, expected {n_features}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_parts(n_features, values, labels, feature_names)
    }

    pub fn from_parts(
        n_features: usize,
        values: Vec<f64>,
        labels: Vec<f64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if n_features == 0 {
            return Err(Error::Structural("dataset needs at least one feature".into()));
        }
        if feature_names.len() != n_features || values.len() != labels.len() * n_features {
            return Err(Error::Structural(format!(
                "{} values do not form {} rows of {n_features} features",
                values.len(),
                labels.len()
            )));
        }
        if let Some(y) = labels.iter().find(|y| !y.is_finite()) {
            return Err(Error::InvalidInput(format!("label {y} is not finite")));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::InvalidInput("feature values must be finite or missing".into()));
        }
        Ok(Dataset {
            n_features,
            values,
            labels,
            feature_names,
            label_name: "label".into(),
            seed: None,
        })
    }

    pub fn with_label_name(mut self, name: impl Into<String>) -> Self {
        self.label_name = name.into();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_features)
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn label_name(&self) -> &str {
        &self.label_name
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn column(&self, f: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[f])
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| is_missing(**v)).count()
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut values = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_rows() {
                return Err(Error::InvalidInput(format!("row index {i} out of range")));
            }
            values.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Ok(Dataset {
            n_features: self.n_features,
            values,
            labels,
            feature_names: self.feature_names.clone(),
            label_name: self.label_name.clone(),
            seed: self.seed,
        })
    }

    /// Row indices grouped by label value 0 and 1. Other labels are ignored.
    pub fn indices_by_class(&self) -> (Vec<usize>, Vec<usize>) {
        let mut zeros = Vec::new();
        let mut ones = Vec::new();
        for (i, &y) in self.labels.iter().enumerate() {
            if y == 0.0 {
                zeros.push(i);
            } else if y == 1.0 {
                ones.push(i);
            }
        }
        (zeros, ones)
    }

    pub fn is_binary(&self) -> bool {
        self.labels.iter().all(|&y| y == 0.0 || y == 1.0)
    }
}
