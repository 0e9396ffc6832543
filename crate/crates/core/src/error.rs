use alloc::string::String;

/// Errors produced by the core library.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("utility matrix row {row}: {message}")]
    Utility { row: usize, message: String },
    #[error("non-finite loss contribution from sample {index}")]
    NonFinite { index: usize },
    #[error(
        "training diverged at epoch {epoch}, batch {batch}: non-finite loss from sample {index}"
    )]
    Diverged {
        epoch: usize,
        batch: usize,
        index: usize,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// True for errors caused by bad arguments or data, as opposed to
    /// numerical failure during computation.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NonFinite { .. } | Error::Diverged { .. })
    }
}

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
