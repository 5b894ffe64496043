use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("chain state left the domain at step {step}")]
    StateLeftDomain { step: usize },

    /// The requested computation is not available at this dimension or
    /// configuration (for example an exact scan in d > 3).
    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("cover resolution {requested} unreachable; finest achieved {achieved}")]
    CoverUnreachable { requested: f64, achieved: f64 },

    #[error("precondition violated at index {index}: {reason}")]
    Precondition { index: usize, reason: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
