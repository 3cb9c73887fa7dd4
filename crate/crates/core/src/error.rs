use std::path::PathBuf;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions {0:?}: every axis must be positive")]
    InvalidDims([usize; 3]),

    #[error("invalid voxel size {0}: must be finite and positive")]
    InvalidVoxelSize(f64),

    #[error("data length {len} does not match dims {dims:?}")]
    LengthMismatch { len: usize, dims: [usize; 3] },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value at voxel {index}")]
    NonFinite { index: usize },

    #[error("axis {axis} of length {len} is not divisible by bin factor {factor}")]
    IndivisibleBin { axis: char, len: usize, factor: usize },

    #[error("paste of {sub:?} at offset {offset:?} exceeds target {target:?}")]
    PasteOutOfBounds { sub: [usize; 3], offset: [i64; 3], target: [usize; 3] },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unknown element(s): {}", .0.join(", "))]
    UnknownElements(Vec<String>),

    #[error("no voxels above threshold {0}")]
    EmptyThreshold(f64),

    #[error("placed {placed} of {requested} particles: class {class} failed after {attempts} attempts")]
    PlacementFailed { placed: usize, requested: usize, class: String, attempts: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("slice thickness {thickness} Å is not a multiple of voxel size {voxel_size} Å")]
    SliceThickness { thickness: f64, voxel_size: f64 },

    #[error("tilt series is empty")]
    EmptySeries,

    #[error("background region is empty")]
    EmptyBackground,

    #[error("signal region is empty")]
    EmptySignal,

    #[error("ground truth has no occupancy mask")]
    MissingOccupancy,

    #[error("MRC format: {0}")]
    Mrc(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    IoBare(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
