use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("corrupt image: {0}")]
    CorruptImage(String),

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("expected a {expected} image, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("image too small for PCA: {0} pixels (need at least 3)")]
    DegenerateImage(usize),

    #[error("dataset is empty: {0}")]
    EmptyDataset(String),

    #[error("class `{class}` has {count} items, not a multiple of {k}")]
    NotTrimmed { class: String, count: usize, k: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("need at least 2 folds to aggregate, got {0}")]
    InsufficientFolds(usize),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::FileNotFound(path)
        } else {
            Error::Io { path, source }
        }
    }
}
