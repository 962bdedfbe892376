use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong between reading a PGM file and writing a
/// trained model bundle.
#[derive(Debug, Error)]
pub enum Error {
    #[error("pgm decode error at byte {offset}: {message}")]
    Decode { offset: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("value {value} outside domain [{min}, {max}]")]
    OutOfDomain { value: f64, min: f64, max: f64 },

    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("ingestion error at {}: {message}", path.display())]
    Ingestion { path: PathBuf, message: String },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("bundle format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("bundle checksum mismatch")]
    ChecksumMismatch,

    #[error("malformed bundle: {0}")]
    MalformedBundle(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn ingestion(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Ingestion {
            path: path.into(),
            message: msg.into(),
        }
    }

    /// True for errors caused by the data on disk rather than by how the
    /// library was called.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Decode { .. }
                | Error::Ingestion { .. }
                | Error::Degenerate(_)
                | Error::DegenerateTraining(_)
                | Error::InvalidSplit(_)
                | Error::VersionMismatch { .. }
                | Error::ChecksumMismatch
                | Error::MalformedBundle(_)
                | Error::Io(_)
        )
    }
}
