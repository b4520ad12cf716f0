use thiserror::Error;

/// Errors raised by the norm laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("exponent mismatch: {left} vs {right}")]
    ExponentMismatch { left: f64, right: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("wrong quantization: expected {expected}, found {found}")]
    WrongQuantization { expected: String, found: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
