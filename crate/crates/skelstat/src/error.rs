//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by the skelstat library.
///
/// `Validation` covers bad inputs (files, schemas, preconditions) and maps to
/// CLI exit code 2; `Numerical` covers failures of iterative procedures and
/// degenerate geometry and maps to exit code 1.
#[derive(Error, Debug)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),

    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
