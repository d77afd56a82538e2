use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("lookup error: unknown ticker {0:?}")]
    UnknownTicker(String),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error("report error: {0}")]
    Report(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Process exit code for this error class: 2 config, 3 backend, 4 data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Template(_) => 2,
            Error::Backend(_) => 3,
            _ => 4,
        }
    }
}

/// Failures raised while scoring a single comparison.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    /// Timeout, connection failure or a retryable HTTP status.
    #[error("transport error: {0}")]
    Transport(String),

    /// The backend cannot produce token log-probabilities; fatal for the run.
    #[error("capability error: {0}")]
    Capability(String),

    /// Task-local failure (e.g. a ticker that produced no sub-tokens).
    #[error("task error: {0}")]
    Task(String),

    #[error("numeric error: {0}")]
    Numeric(String),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }

    pub fn is_fatal(&self) -> bool {
        matches!(self, BackendError::Capability(_))
    }
}
