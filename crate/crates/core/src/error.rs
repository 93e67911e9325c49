//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),

    #[error("unsupported sample rate {0} Hz (expected 16000)")]
    UnsupportedSampleRate(u32),

    #[error("audio contains no samples")]
    EmptyAudio,

    #[error("audio too short: {samples} samples, need at least {required}")]
    TooShort { samples: usize, required: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("length mismatch: {windows} windows but {labels} labels")]
    LengthMismatch { windows: usize, labels: usize },

    #[error("invalid label {0} (must be < 28)")]
    InvalidLabel(usize),

    #[error("layer {layer} uses an activation LRP cannot propagate through: {activation}")]
    UnsupportedLayer { layer: usize, activation: String },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("too many features for exact enumeration: {0} (max 20)")]
    TooManyFeatures(usize),

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("clip value must be positive, got {0}")]
    NonPositiveClip(f64),

    #[error("label count {labels} does not match frame count {frames}")]
    LabelLengthMismatch { labels: usize, frames: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        match e.classify() {
            serde_json::error::Category::Io => Error::Io(e.into()),
            _ => Error::Parse(e.to_string()),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::Io(io),
                other => Error::Parse(format!("{other:?}")),
            }
        } else {
            Error::Parse(e.to_string())
        }
    }
}
