use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("log density is NaN at {point:?}")]
    NanLogDensity { point: Vec<f64> },

    #[error("could not find a finite initial point after {attempts} attempts; re-initialize the sampler")]
    InitializationFailed { attempts: usize },

    #[error("ODE solver failure: {0}")]
    Solver(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("probability table is not normalized: {0}")]
    NotNormalized(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{failed} of {total} jobs failed, above the allowed fraction")]
    TooManyFailures { failed: usize, total: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
