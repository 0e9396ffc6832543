use std::path::PathBuf;

/// Errors raised by the IO layer and the command-line driver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] lbd_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{}: malformed checkpoint: {message}", path.display())]
    Checkpoint { path: PathBuf, message: String },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for invalid input (arguments, configs, data files), 2 for failures
    /// while running (IO, numerical divergence).
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Core(e) if e.is_validation() => 1,
            Error::Parse { .. } | Error::Config(_) | Error::Checkpoint { .. } => 1,
            _ => 2,
        }
    }
}
