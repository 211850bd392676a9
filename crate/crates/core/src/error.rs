//! Crate-wide error type.
//!
//! Every rejection carries enough context to name the offending input; the
//! CLI maps `NonFiniteLoss` to a runtime-failure exit code and everything
//! else to an input-validation exit code.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate rotation: zero-norm quaternion")]
    DegenerateRotation,

    #[error("{context}: dimension mismatch, expected {expected_w}x{expected_h}x{expected_c}, got {got_w}x{got_h}x{got_c}")]
    DimensionMismatch {
        context: &'static str,
        expected_w: usize,
        expected_h: usize,
        expected_c: usize,
        got_w: usize,
        got_h: usize,
        got_c: usize,
    },

    #[error("{context}: non-finite value at element {index}")]
    NonFinite { context: &'static str, index: usize },

    #[error("need at least two classes, got {got}")]
    NeedTwoClasses { got: usize },

    #[error("probabilities at pixel ({x}, {y}) sum to {sum}, expected 1 within {tolerance}")]
    ProbabilitySum {
        x: usize,
        y: usize,
        sum: f64,
        tolerance: f64,
    },

    #[error("fst beta must lie in (0, 0.5], got {beta}")]
    InvalidBeta { beta: f64 },

    #[error("invalid configuration: {what}")]
    InvalidConfig { what: String },

    #[error("invalid camera: {what}")]
    CameraInvalid { what: String },

    #[error("camera rotation block not orthonormal: max deviation {max_dev:.3e} exceeds {tolerance:.1e}")]
    CameraNotOrthonormal { max_dev: f64, tolerance: f64 },

    #[error("ply: missing required property '{name}'")]
    PlyMissingProperty { name: String },

    #[error("ply: binary_little_endian required, found '{found}'")]
    PlyNotBinaryLittleEndian { found: String },

    #[error("ply: {what}")]
    PlyMalformed { what: String },

    #[error("tensor: bad magic {found:?}, expected \"UARS\"")]
    TensorBadMagic { found: [u8; 4] },

    #[error("tensor: unsupported format version {found}, expected 1")]
    TensorBadVersion { found: u32 },

    #[error("truncated tensor: payload holds {got} values, dims declare {expected}")]
    TensorTruncated { expected: usize, got: usize },

    #[error("tensor: dims invalid: {what}")]
    TensorBadDims { what: String },

    #[error("manifest field '{path}': {what}")]
    ManifestField { path: String, what: String },

    #[error("referenced file not found: {path}")]
    MissingFile { path: String },

    #[error("logits resolution for view {view} is {got_w}x{got_h}, expected {expected_w}x{expected_h}")]
    LogitsResolutionMismatch {
        view: usize,
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("refinement requires at least one pseudo-view")]
    EmptyPseudoViews,

    #[error("non-finite loss at step {step}")]
    NonFiniteLoss { step: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that indicate a numeric breakdown at runtime rather
    /// than bad input.
    pub fn is_runtime_numeric(&self) -> bool {
        matches!(self, Error::NonFiniteLoss { .. })
    }
}
