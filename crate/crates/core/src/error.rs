use thiserror::Error;

/// Error categories shared by every module. The CLI maps them onto exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QrlError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("capacity error: {0}")]
    Capacity(String),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("sampling error: {0}")]
    Sampling(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, QrlError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(QrlError::Domain(msg.into()))
}

pub(crate) fn capacity<T>(msg: impl Into<String>) -> Result<T> {
    Err(QrlError::Capacity(msg.into()))
}

pub(crate) fn invariant<T>(msg: impl Into<String>) -> Result<T> {
    Err(QrlError::Invariant(msg.into()))
}
