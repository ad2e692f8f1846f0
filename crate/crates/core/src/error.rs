use thiserror::Error;

#[derive(Debug, Error)]
pub enum StormError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid code {bits:?}: a 0 bit is followed by a 1 bit")]
    InvalidCode { bits: Vec<u8> },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value {value} at row {row}, column {column}")]
    NonFinite { row: usize, column: usize, value: f64 },

    #[error("operation requires constrained transitions (invalid codewords carry mass otherwise)")]
    UnconstrainedMode,

    #[error("{path}: row {row}: {message}")]
    Csv { path: String, row: usize, message: String },

    #[error("expected at least {needed} distinct target values, found {found}")]
    TooFewDistinct { needed: usize, found: usize },

    #[error("serialization: {0}")]
    Serialization(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl StormError {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        StormError::InvalidArgument(msg.into())
    }

    /// True for errors caused by bad user input rather than internal failures.
    pub fn is_validation(&self) -> bool {
        !matches!(self, StormError::Io(_))
    }
}

pub type Result<T, E = StormError> = std::result::Result<T, E>;
