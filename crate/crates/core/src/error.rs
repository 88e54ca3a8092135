use thiserror::Error;

/// Error type shared by every module of the toolkit.
///
/// The three kinds map onto the CLI exit codes: usage (1), data (2) and
/// numeric failure (3). I/O errors are reported as data errors by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid arguments or configuration supplied by the caller.
    #[error("usage error: {0}")]
    Usage(String),
    /// Input data violates the schema or cannot be processed.
    #[error("data error: {0}")]
    Data(String),
    /// An optimizer or solver produced non-finite values.
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Data(format!("csv: {other:?}")),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
