//! Rigid-body algebra, camera projection and hand-eye transforms.
//!
//! Units are explicit: trajectories and depth maps are in meters, hand-eye
//! translations are in millimeters (as delivered with the calibration files).
//! Nothing converts between them implicitly.

mod camera;
mod hand_eye;
mod pose;
mod rigid;

pub use camera::{CameraIntrinsics, CameraModel, Pixel};
pub use hand_eye::HandEye;
pub use pose::Pose;
pub use rigid::{fit_rigid, Similarity};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("point has non-positive depth {0}")]
    NonPositiveDepth(f64),
    #[error("radial distortion inversion did not converge (distorted radius {radius})")]
    DistortionInversionFailed { radius: f64 },
    #[error("ray at {0} rad from the optical axis cannot be given a z-depth")]
    RayBehindCamera(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(&'static str),
    #[error("quaternion has zero norm")]
    ZeroQuaternion,
    #[error("matrix is not a rotation (orthonormality deviation {deviation:e})")]
    NotARotation { deviation: f64 },
    #[error("need at least {needed} point pairs, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("point sets have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("point configuration is degenerate (collinear or coincident)")]
    DegenerateGeometry,
}
