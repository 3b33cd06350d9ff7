use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("no radar observations")]
    NoRadar,

    #[error("mask selects no pixels")]
    EmptyMask,

    #[error("non-positive or non-finite value {value} at pixel ({row}, {col})")]
    NonPositiveDepth { row: usize, col: usize, value: f64 },

    #[error("no valid camera pose after {attempts} attempts")]
    PoseSamplingExhausted { attempts: usize },

    #[error("camera ray through pixel ({u}, {v}) does not hit the terrain")]
    RayMiss { u: usize, v: usize },

    #[error("corner list is empty")]
    NoCorners,

    #[error("validation history is empty")]
    EmptyHistory,

    #[error("non-finite training loss {value} at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: usize, value: f64 },

    #[error("missing parameter `{0}` in checkpoint")]
    MissingParameter(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
