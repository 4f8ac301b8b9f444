use thiserror::Error;

/// Errors raised by the group, kernel, adjustment, and simulation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("group has {len} completions, at least {min} required")]
    GroupTooSmall { len: usize, min: usize },

    #[error("embedding {index} has norm {norm:e}, below the zero-norm threshold")]
    ZeroNormEmbedding { index: usize, norm: f64 },

    #[error("non-finite value in {what}")]
    NonFiniteValue { what: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for group of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("similarity matrix is not positive definite (jitter {jitter:e})")]
    NotPositiveDefinite { jitter: f64 },

    #[error("invalid similarity matrix: {0}")]
    InvalidMatrix(String),

    #[error("non-positive denominator {value:e} for completion {index}")]
    NonPositiveDenominator { index: usize, value: f64 },

    #[error("importance ratio must be finite and positive, got {0}")]
    NonPositiveRatio(f64),

    #[error("no old-policy probabilities recorded for trajectory {0}")]
    StaleSnapshot(usize),

    #[error("bad trajectory: {0}")]
    BadTrajectory(String),

    #[error("duplicate geometry is not exact: {0}")]
    GeometryNotExact(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("length {len} outside [0, {max_len}]")]
    LengthOutOfRange { len: usize, max_len: usize },

    #[error("unknown reward component `{0}`")]
    UnknownComponent(String),

    #[error("invalid configuration `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}
