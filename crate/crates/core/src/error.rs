use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error on {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported model format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("corrupt model file: {0}")]
    Corruption(String),

    #[error("external tool not found: {0}")]
    ExternalToolNotFound(String),

    #[error("external tool `{command}` failed with {status}: {stderr}")]
    ExternalToolFailure {
        command: String,
        status: String,
        stderr: String,
    },

    #[error("decode error: {0}")]
    Decode(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::InvalidState(_) => 2,
            Error::Io { .. } | Error::Image { .. } => 3,
            Error::Format(_) | Error::Version { .. } | Error::Corruption(_) | Error::Decode(_) => 4,
            Error::ExternalToolNotFound(_) | Error::ExternalToolFailure { .. } => 5,
        }
    }
}
