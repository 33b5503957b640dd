use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("invalid raster dimensions {width}x{height}")]
    InvalidDimensions { width: u32, height: u32 },

    #[error("malformed RLE: {0}")]
    MalformedRle(String),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },

    #[error("mask has no set pixels")]
    EmptyMask,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{item} {index}: {reason}")]
    Validation {
        item: &'static str,
        index: usize,
        reason: String,
    },

    #[error("prediction {index} (scene '{scene_id}'): {source}")]
    InPrediction {
        index: usize,
        scene_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown scene '{0}'")]
    UnknownScene(String),

    #[error("cannot load image {path}: {reason}")]
    ImageLoad { path: PathBuf, reason: String },

    #[error("cannot write image {path}: {reason}")]
    ImageWrite { path: PathBuf, reason: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid probability {value} at index {index}")]
    InvalidProbability { index: usize, value: f64 },

    #[error("class index {class} out of range (0..{len})")]
    InvalidClass { class: usize, len: usize },

    #[error("non-differentiable point: {0}")]
    NonDifferentiablePoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn validation(item: &'static str, index: usize, reason: impl Into<String>) -> Self {
        Error::Validation {
            item,
            index,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures of the filesystem rather than of the data.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. } | Error::ImageLoad { .. } | Error::ImageWrite { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
