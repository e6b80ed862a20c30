use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the matching library and experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("bad IDX magic: expected {expected:#010x}, found {actual:#010x}")]
    Magic { expected: u32, actual: u32 },

    #[error("invalid format: {0}")]
    Format(String),

    #[error("truncated stream: expected {expected} bytes, found {actual}")]
    Length { expected: usize, actual: usize },

    #[error("not enough images for digit {class}: need {needed}, have {available}")]
    Capacity {
        class: u8,
        needed: usize,
        available: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("jet cache invalid: {0}")]
    CacheInvalid(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
