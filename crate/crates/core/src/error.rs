use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} features, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid label {0}: binary logistic loss requires labels in {{0, 1}}")]
    Label(f64),

    #[error("degenerate leaf: hessian sum {hessian} + lambda {lambda} must be positive")]
    DegenerateLeaf { hessian: f64, lambda: f64 },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quantile sketch is empty")]
    EmptySketch,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("ingestion error at row {row}, column {column}: {message}")]
    Ingestion {
        row: usize,
        column: String,
        message: String,
    },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("partition error: {0}")]
    Partition(String),

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
