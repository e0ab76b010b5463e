use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("heat-kernel time must be positive and finite, got {0}")]
    InvalidTime(f64),

    #[error("geodesic between the two points is not unique (antipodal pair)")]
    AntipodalPair,

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("argument {0} outside the unit interval")]
    OutOfDomain(f64),

    #[error("path has K = {found} but the prior expects K = {expected}")]
    SidelengthMismatch { expected: usize, found: usize },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("all predictor values are equal")]
    DegeneratePredictors,

    #[error("Fréchet mean iteration did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("manifold mismatch: expected {expected}, found {found}")]
    ManifoldMismatch { expected: String, found: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
