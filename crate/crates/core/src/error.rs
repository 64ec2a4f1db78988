//! Error type shared by every module of the crate.

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by tensor, reporter and attention operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Operands disagree on a dimension (vector length, matrix shape).
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    /// A scalar parameter is outside its documented domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A count (top-r size, index) exceeds the valid range.
    #[error("range error: {0}")]
    Range(String),
    /// A matrix file is malformed (bad magic, truncated payload).
    #[error("format error: {0}")]
    Format(String),
    /// Underlying file I/O failed.
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
