//! Image modifications for robustness studies: resizing, repeated Gaussian
//! blur, vignetting, fisheye remapping, depth-of-field defocus and frame-rate
//! reduction, plus an ordered pipeline description ([`AugmentSpec`]).

mod spec;
mod transforms;

pub use spec::{AugmentSpec, Transform};
pub use transforms::{
    depth_of_field, fisheye, framerate_subsample, gaussian_blur_repeated, resize, resize_depth, vignette,
    vignette_gain, DofParams, DEFAULT_MAX_DOF_SIGMA,
};

use alloc::string::String;

use thiserror::Error;

use crate::imaging::ImagingError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("target size must be positive, got {0}x{1}")]
    BadSize(usize, usize),
    #[error("discard ratio must lie in (0, 1], got {0}")]
    BadRatio(f64),
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
    #[error("depth-of-field needs a depth map")]
    MissingDepth,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}
