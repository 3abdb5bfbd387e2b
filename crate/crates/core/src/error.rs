use std::io;

use thiserror::Error;

/// Errors raised across the crate.
///
/// `Validation`, `Capacity`, `Row` and `Dimension` describe bad input;
/// `Io` is reserved for the file system so callers can tell them apart.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("capacity error: {0}")]
    Capacity(String),

    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("malformed json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by the file system rather than by the content
    /// of the input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io(_))
    }
}

impl From<csv::Error> for Error {
    fn from(err: csv::Error) -> Self {
        let row = err.position().map(|p| p.record() as usize);
        match err.into_kind() {
            csv::ErrorKind::Io(e) => Error::Io(e),
            kind => {
                let message = format!("{:?}", kind);
                match row {
                    Some(row) => Error::Row { row, message },
                    None => Error::Validation(message),
                }
            }
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
