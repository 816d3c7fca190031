use thiserror::Error;

/// Errors produced by the pose estimation core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point lies at or behind the camera plane (z = {0})")]
    NonPositiveDepth(f64),
    #[error("camera lies inside the unit sphere (distance {0})")]
    CameraInsideSphere(f64),
    #[error("invalid scale {0}: must be positive and finite")]
    InvalidScale(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("matrix is not a proper rotation (orthonormality error {0:e})")]
    InvalidRotation(f64),
    #[error("homography is singular")]
    SingularHomography,
    #[error("point cloud is degenerate (all points coincide)")]
    DegenerateCloud,
    #[error("image too small: {width}x{height}")]
    ImageTooSmall { width: usize, height: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("template has zero variance")]
    ZeroVariance,
    #[error("no detection: best score {score:.3} below threshold {threshold:.3}")]
    NoDetection { score: f64, threshold: f64 },
    #[error("too few references: need {needed}, have {available}")]
    TooFewReferences { needed: usize, available: usize },
    #[error("feature volume is empty ({valid} of {total} vertices valid)")]
    EmptyVolume { valid: usize, total: usize },
    #[error("zero-length vector")]
    ZeroVector,
    #[error("value must be positive: {0}")]
    NonPositive(&'static str),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("model point set is empty")]
    EmptyModel,
    #[error("error list is empty")]
    EmptyList,
    #[error("rays are parallel or the baseline is zero")]
    DegenerateRays,
    #[error("correspondences are collinear or too few")]
    Collinear,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
