use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = MomError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MomError {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("unknown label value {value:?} at row {row}")]
    Label { row: usize, value: String },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl MomError {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        MomError::Argument(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        MomError::Numeric(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MomError::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(MomError::Dimension { expected, found })
    }
}
