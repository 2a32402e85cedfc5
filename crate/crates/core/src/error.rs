use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input rejected before any state was touched.
    #[error("validation error: {0}")]
    Validation(String),

    /// Trace stream could not be consumed; `t` is the offending frame time.
    #[error("stream error at t={t}: {message}")]
    Stream { t: f64, message: String },

    /// Operation not allowed in the current lifecycle state (e.g. append after seal).
    #[error("state error: {0}")]
    State(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    /// Structured-text parse failure with a 1-based position when known.
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("corrupt store file {path}: {message}")]
    Corrupt { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn stream(t: f64, msg: impl Into<String>) -> Self {
        Error::Stream {
            t,
            message: msg.into(),
        }
    }

    /// Exit code contract of the command-line front end: 1 for input
    /// problems, 2 for stream and store failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Conflict(_) | Error::Parse { .. } => 1,
            Error::Stream { .. }
            | Error::State(_)
            | Error::NotFound(_)
            | Error::Corrupt { .. }
            | Error::Io(_)
            | Error::Json(_) => 2,
        }
    }
}
