//! Shared error type for the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual} ({context})")]
    DimensionMismatch {
        expected: usize,
        actual: usize,
        context: &'static str,
    },

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, history: Vec<f64> },

    #[error("objective became non-finite at epoch {epoch}")]
    NonFiniteObjective { epoch: usize, trace: Vec<f64> },

    #[error("exact volume term unavailable: mapping is not an invertible net")]
    ExactVolumeUnavailable,

    #[error("dataset has no labels")]
    NoLabels,

    #[error("bad magic number: expected {expected:#010x}, got {actual:#010x}")]
    BadMagic { expected: u32, actual: u32 },

    #[error("truncated file: needed {needed} bytes, had {available}")]
    TruncatedFile { needed: usize, available: usize },

    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },

    #[error("signal too short: need at least {needed} samples, got {actual}")]
    TooShort { needed: usize, actual: usize },

    #[error("invalid model bundle: {0}")]
    InvalidBundle(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code contract: 2 = configuration, 3 = data/bundle,
    /// 4 = numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::NoLabels
            | Error::BadMagic { .. }
            | Error::TruncatedFile { .. }
            | Error::CountMismatch { .. }
            | Error::UnsupportedFormat(_)
            | Error::SampleRateMismatch { .. }
            | Error::TooShort { .. }
            | Error::InvalidBundle(_)
            | Error::DimensionMismatch { .. }
            | Error::Io(_)
            | Error::Json(_) => 3,
            Error::NotPositiveDefinite { .. }
            | Error::NonFiniteLoss { .. }
            | Error::NonFiniteObjective { .. }
            | Error::ExactVolumeUnavailable => 4,
        }
    }
}
