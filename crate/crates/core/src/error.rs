use thiserror::Error;

/// Errors raised by the geometry, refinement, evaluation and I/O layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("point is behind the camera (homogeneous depth {depth:e})")]
    PointBehindCamera { depth: f64 },
    #[error("invalid depth {0}: must be positive")]
    InvalidDepth(f64),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("intrinsic matrix is singular or malformed: {0}")]
    SingularIntrinsics(String),
    #[error("normalized object height {0:e} is degenerate")]
    DegenerateHeight(f64),
    #[error("no size prior for class `{0}`")]
    UnknownClass(String),
    #[error("degenerate quadrilateral: {0}")]
    DegenerateQuad(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },
    #[error("value {value} out of range [{min}, {max}]")]
    OutOfRange { value: f64, min: f64, max: f64 },
    #[error("parse error at line {line}, field {field}: {message}")]
    Parse {
        line: usize,
        field: usize,
        message: String,
    },
    #[error("unknown matrix key `{key}` at line {line}")]
    UnknownMatrixKey { key: String, line: usize },
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
