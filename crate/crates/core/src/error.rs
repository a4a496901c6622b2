use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid shape {0:?}: extents must be >= 1 and match the data length")]
    InvalidShape(Vec<usize>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("backward pass for {layer} called without a matching forward cache")]
    MissingCache { layer: &'static str },

    #[error("architecture string, token {position} ({token:?}): {reason}")]
    Arch {
        position: usize,
        token: String,
        reason: String,
    },

    #[error("malformed model file at byte {offset}: {reason}")]
    ModelFormat { offset: u64, reason: String },

    #[error("malformed cache file at byte {offset}: {reason}")]
    CacheFormat { offset: u64, reason: String },

    #[error("sequence {sequence}, frame {frame}: zero spread in {axis} coordinates")]
    DegenerateFrame {
        sequence: String,
        frame: usize,
        axis: char,
    },

    #[error("{path}, line {line}: {reason}")]
    Data {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error("subject leakage in fold {fold}: {subjects:?} appear in both train and test")]
    SubjectLeakage { fold: usize, subjects: Vec<String> },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for failures of the filesystem rather than of the inputs' content.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Image(image::ImageError::IoError(_)) => true,
            Error::Csv(e) => matches!(e.kind(), csv::ErrorKind::Io(_)),
            _ => false,
        }
    }
}
