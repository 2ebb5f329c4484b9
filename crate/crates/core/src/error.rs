use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes that do not agree, are too small, or do not divide evenly.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// A numeric parameter outside its valid range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An inconsistent combination of options.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("size mismatch for {path}: expected {expected} bytes, found {actual}")]
    SizeMismatch {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },

    #[error("corrupt header {path}: {reason}")]
    CorruptHeader { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
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
