//! Algorithms for evaluating and aligning monocular endoscopic visual odometry.
//!
//! The crate is `no_std` (it needs `alloc`) so it can be embedded anywhere a
//! heap is available. All file formats, the CLI and anything touching the
//! filesystem live in the `endovo` companion crate.
//!
//! Modules:
//! - [`geometry`]: SE(3) poses, pinhole/fisheye cameras, hand-eye transforms.
//! - [`imaging`]: rasters, sampling, blur, SSIM, Otsu, diffusion inpainting.
//! - [`warp_loss`]: inverse warping and the brightness-aware self-supervised objective.
//! - [`esab`]: forward pass of the spatial non-local attention block.
//! - [`pose_align`]: direct photometric refinement of a relative pose.
//! - [`traj_metrics`]: association, Horn alignment, ATE and RPE.
//! - [`temporal_sync`]: Lucas-Kanade flow divergence, robot speed and lag search.
//! - [`augmentation`]: resize, blur, vignetting, fisheye, defocus, frame dropping.
//! - [`reconstruction`]: features, RANSAC homographies, stitching, specular
//!   suppression, shape from shading and ICP.

#![no_std]
#![warn(missing_debug_implementations)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod augmentation;
pub mod esab;
pub mod geometry;
pub mod imaging;
pub mod kdtree;
pub mod pose_align;
pub mod reconstruction;
pub mod stats;
pub mod temporal_sync;
pub mod traj_metrics;
pub mod warp_loss;

pub use geometry::{CameraIntrinsics, CameraModel, HandEye, Pose};
pub use imaging::{ImageBuffer, Mask};
pub use warp_loss::DepthMap;
