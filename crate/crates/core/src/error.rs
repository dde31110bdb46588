use thiserror::Error;

/// Errors raised by the numerical engines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("size limit exceeded: {what} needs {required}, bound is {bound}")]
    Size {
        what: &'static str,
        required: usize,
        bound: usize,
    },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("divergence detected: {0}")]
    Divergence(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("validation failed: {0}")]
    Validation(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
