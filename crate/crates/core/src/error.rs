use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty pose sequence")]
    EmptyPoses,

    #[error("redundancy undefined for fewer than two keyframes")]
    RedundancyTooFew,

    #[error("{what} requires at least {min} keyframes, got {got}")]
    TooFewKeyframes { what: &'static str, min: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("frame id {id} is not greater than previous id {last}")]
    NonMonotoneId { id: u64, last: u64 },

    #[error("duplicate keyframe id {0}")]
    DuplicateId(u64),

    #[error("spaciousness requires point clouds")]
    SpaciousnessNeedsScans,

    #[error("entropy sampling requires point clouds")]
    EntropyNeedsScans,

    #[error("{0} requires descriptors")]
    MissingDescriptors(&'static str),

    #[error("descriptor count mismatch: expected {expected}, found {found}")]
    CountMismatch { expected: usize, found: usize },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem itself rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
