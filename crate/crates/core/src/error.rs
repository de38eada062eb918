use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = EsmlrError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EsmlrError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed data: {0}")]
    Format(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl EsmlrError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EsmlrError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            EsmlrError::Config(_) => 1,
            EsmlrError::Io { .. }
            | EsmlrError::Format(_)
            | EsmlrError::Dimension(_)
            | EsmlrError::InvalidInput(_) => 2,
            EsmlrError::Numerical(_) => 3,
        }
    }
}
