use std::io;

use thiserror::Error;

/// Errors produced by the simulation and reconstruction toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value at sample {index}")]
    NonFinite { index: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid grid size {0}: must be even and at least 2")]
    InvalidSize(usize),

    #[error("image is not square ({width}x{height})")]
    NonSquare { width: usize, height: usize },

    #[error("odd image size {0}")]
    OddSize(usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
