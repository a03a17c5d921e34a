//! Inverse warping and the self-supervised training objective, evaluated as
//! plain functions of images, depths, a relative pose and intrinsics.
//!
//! The objective is `L = α·L_bp^M + β·L_s + γ·L_GC`:
//! - `L_bp`: per-pixel `λ_p·‖T_b(Î) − I‖₂ + λ_s·(1 − SSIM)/2` over the pixels
//!   that warped successfully, where `T_b(x) = a·x + c` aligns the brightness
//!   of the synthesized frame to the target (clamped to `[0, 1]`). SSIM is one
//!   scalar per pair, computed over the valid region.
//! - `L_bp^M`: the same mean with each pixel weighted by `M = 1 − D_diff`.
//! - `L_s`: edge-aware depth smoothness on mean-normalized depth.
//! - `L_GC`: mean normalized depth disagreement `D_diff` between the warped
//!   target depth and the interpolated source depth.

mod depth;
pub(crate) mod loss;
mod warp;

pub use depth::DepthMap;
pub use loss::{
    depth_difference, estimate_brightness, geometry_consistency_loss, photometric_loss, photometric_map,
    smoothness_loss, total_loss, BrightnessParams, FramePair, LossOptions, LossReport, LossWeights,
    PhotometricMap,
};
pub use warp::{depth_consistency, warp_image, BackProjection};

use thiserror::Error;

use crate::imaging::{ImagingError, Mask};

/// Pixels of the reference frame that projected inside the source frame.
pub type ValidMask = Mask;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error("no valid pixels under the mask")]
    EmptyMask,
    #[error("synthesized intensities are constant under the mask; fallback gain 1, offset {}", fallback.c)]
    DegenerateIntensities { fallback: BrightnessParams },
    #[error("brightness gain must be positive, got {0}")]
    NonPositiveGain(f64),
    #[error("loss weights must be finite and non-negative")]
    InvalidWeights,
}
