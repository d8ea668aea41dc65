use std::path::PathBuf;

use thiserror::Error;

use crate::types::{BoundingBox, Canvas, ClassId};

#[derive(Debug, Error)]
pub enum Error {
    #[error("registry has no classes")]
    EmptyRegistry,
    #[error("class names must be non-empty")]
    EmptyClassName,
    #[error("duplicate class name `{0}`")]
    DuplicateClass(String),
    #[error("background class `{0}` is not in the class list")]
    MissingBackground(String),
    #[error("{0} classes exceed the 8-bit id range")]
    TooManyClasses(usize),
    #[error("unknown class name `{0}`")]
    UnknownClassName(String),
    #[error("class id {0} is not in the registry")]
    UnknownClassId(ClassId),

    #[error("image id must be non-empty")]
    EmptyImageId,
    #[error("duplicate image id `{0}`")]
    DuplicateImage(String),
    #[error("canvas {width}x{height} is empty")]
    EmptyCanvas { width: u32, height: u32 },
    #[error("box [{x0},{y0},{x1},{y1}) is empty or inverted")]
    InvalidBox { x0: u32, y0: u32, x1: u32, y1: u32 },
    #[error("box {bbox:?} exceeds canvas {canvas}")]
    BoxOutOfBounds { bbox: BoundingBox, canvas: Canvas },
    #[error("score {0} outside [0, 1]")]
    InvalidScore(f64),
    #[error("detections may not use the background class")]
    BackgroundDetection,
    #[error("score threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),

    #[error("run lengths sum to {actual}, expected {expected}")]
    RunSumMismatch { expected: u64, actual: u64 },
    #[error("zero-length run at position {0}")]
    ZeroRun(usize),
    #[error("grid has {actual} cells, expected {expected}")]
    GridSizeMismatch { expected: usize, actual: usize },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: Canvas, actual: Canvas },

    #[error("invalid fusion order: {0}")]
    InvalidOrder(String),
    #[error("mask for class {0} has no place in the fusion order")]
    CategoryNotInOrder(ClassId),
    #[error("no mask for surviving detection #{0}")]
    MissingMask(usize),
    #[error("invalid strategy `{0}`: expected ordered:<names> or random:<seed>")]
    InvalidStrategy(String),

    #[error("confusion matrix has {actual} classes, registry has {expected}")]
    ClassCountMismatch { expected: usize, actual: usize },
    #[error("no data: confusion matrix is empty")]
    NoData,

    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("could not place requested shapes after {0} attempts")]
    ScenePlacement(usize),
    #[error("invalid noise parameters: {0}")]
    InvalidNoise(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
