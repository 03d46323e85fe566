use thiserror::Error;

/// Errors raised by measure construction, the solvers and the mechanism.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("file error: {0}")]
    File(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// A solver produced a result that fails its own certificate. This is a bug.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::File(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::File(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::File(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
