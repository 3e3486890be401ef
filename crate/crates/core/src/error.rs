use thiserror::Error;

/// Errors raised by objectives, step rules and drivers.
///
/// Numerical divergence during a run is not an error; it is reported through
/// [`crate::RunStatus::Diverged`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid search direction: {0}")]
    InvalidDirection(String),

    #[error("line search failed: {0}")]
    LineSearchFailed(String),

    #[error("invalid step rule: {0}")]
    InvalidRule(String),

    #[error("{0} is not supported by this objective")]
    Unsupported(&'static str),

    #[error("cannot compare variants: {0}")]
    Incomparable(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
