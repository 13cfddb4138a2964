//! Error type shared by all modules.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("payload size mismatch: header declares {expected} bytes, found {actual}")]
    PayloadSizeMismatch { expected: usize, actual: usize },

    #[error("unsupported element type `{0}`")]
    UnsupportedElementType(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("non-finite value at voxel {index}")]
    NonFiniteValue { index: usize },

    #[error("constant volume: z-normalization undefined")]
    ConstantVolume,

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u8, classes: usize },

    #[error("probability map violates simplex constraint at voxel {index} (sum {sum})")]
    NotASimplex { index: usize, sum: f64 },

    #[error("channel count mismatch: {left} vs {right}")]
    ChannelMismatch { left: usize, right: usize },

    #[error("class weight vector has {got} entries, expected {expected}")]
    WeightLength { got: usize, expected: usize },

    #[error("no foreground: {0}")]
    NoForeground(&'static str),

    #[error("undefined surface distance: {0} mask has no boundary")]
    UndefinedSurfaceDistance(&'static str),

    #[error("empty bone class list")]
    EmptyBoneClasses,

    #[error("degenerate ROC: {positives} positive and {negatives} negative bone cases")]
    DegenerateRoc { positives: usize, negatives: usize },

    #[error("phantom geometry too small: {0}")]
    GeometryTooSmall(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
