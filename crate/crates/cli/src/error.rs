use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] nonresp::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 1 usage, 2 data or I/O, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Core(nonresp::Error::Usage(_)) => 1,
            CliError::Core(nonresp::Error::Numeric(_)) => 3,
            CliError::Core(nonresp::Error::Data(_) | nonresp::Error::Io(_)) | CliError::Io { .. } | CliError::Json(_) => 2,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
