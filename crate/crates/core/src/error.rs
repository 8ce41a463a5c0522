use thiserror::Error;

/// Errors produced anywhere in the benchmarking pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported dimension {dim}: {reason}")]
    UnsupportedDimension { dim: usize, reason: String },

    #[error("schema error in `{field}`: {message}")]
    Schema { field: String, message: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("value {value} of `{name}` is outside [{lower}, {upper}]")]
    OutOfBounds {
        name: String,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("targets have zero variance")]
    ZeroVariance,

    #[error("diverged at iteration {iteration}: {message}")]
    Divergence { iteration: usize, message: String },

    #[error("matrix is not positive definite even with jitter {jitter:e}")]
    NotPositiveDefinite { jitter: f64 },

    #[error("non-finite value at datapoint {index}")]
    NonFinite { index: usize },

    #[error("unsupported file version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error("corrupt file {path}: {message}")]
    Corrupt { path: String, message: String },

    #[error("incomplete results: {0}")]
    Incomplete(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }

    /// True for numerical failures (divergence, loss of positive definiteness).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergence { .. } | Error::NotPositiveDefinite { .. } | Error::NonFinite { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
