use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector2, Vector3};

use super::{DepthMap, ValidMask};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::imaging::{bilinear, check_dims, ImageBuffer, ImagingError, Mask, Raster};

/// Rotation matrix and translation of a pose, unpacked once per warp.
type Rigid = (Matrix3<f64>, Vector3<f64>);

/// Reference-frame 3D points for every valid depth pixel. Computing this once
/// lets repeated warps under different poses skip the distortion inversion.
#[derive(Debug, Clone)]
pub struct BackProjection {
    width: usize,
    height: usize,
    points: Vec<Option<Vector3<f64>>>,
}

impl BackProjection {
    pub fn new(depth: &DepthMap, k: &CameraIntrinsics) -> Self {
        let (width, height) = (depth.width(), depth.height());
        let mut points = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let p = depth
                    .get(x, y)
                    .and_then(|d| k.unproject(&Vector2::new(x as f64, y as f64), d).ok());
                points.push(p);
            }
        }
        Self { width, height, points }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn point(&self, x: usize, y: usize) -> Option<&Vector3<f64>> {
        self.points[y * self.width + x].as_ref()
    }

    /// Pixel coordinates in the source frame, plus the transformed point.
    #[inline]
    fn target(&self, x: usize, y: usize, pose: &Rigid, k: &CameraIntrinsics) -> Option<(Vector2<f64>, Vector3<f64>)> {
        let p = pose.0 * self.point(x, y)? + pose.1;
        let px = k.project(&p).ok()?;
        Some((snap_to_border(px, self.width, self.height), p))
    }

    /// Samples every channel of `src` at the projection of each reference point.
    pub fn warp(&self, src: &ImageBuffer, pose: &Pose, k: &CameraIntrinsics) -> Result<(ImageBuffer, ValidMask), ImagingError> {
        check_dims((src.width(), src.height()), (self.width, self.height))?;
        let rigid = (pose.rotation_matrix(), *pose.translation());
        let ch = src.channels();
        let mut out = alloc::vec![0.0; self.width * self.height * ch];
        let mut mask = Mask::filled(self.width, self.height, false);
        let mut sample = alloc::vec![0.0; ch];
        for y in 0..self.height {
            for x in 0..self.width {
                let Some((px, _)) = self.target(x, y, &rigid, k) else {
                    continue;
                };
                let ok = (0..ch).all(|c| {
                    match bilinear(src.width(), src.height(), px.x, px.y, |ix, iy| Some(src.get(ix, iy, c))) {
                        Some(v) => {
                            sample[c] = v;
                            true
                        }
                        None => false,
                    }
                });
                if ok {
                    let base = (y * self.width + x) * ch;
                    out[base..base + ch].copy_from_slice(&sample);
                    mask.set(x, y, true);
                }
            }
        }
        Ok((ImageBuffer::from_raw(self.width, self.height, ch, out), mask))
    }

    /// Normalized disagreement between the warped reference depth and the
    /// interpolated source depth; see [`depth_consistency`].
    pub fn depth_consistency(&self, depth_src: &DepthMap, pose: &Pose, k: &CameraIntrinsics) -> Result<(Raster, ValidMask), ImagingError> {
        check_dims((depth_src.width(), depth_src.height()), (self.width, self.height))?;
        let rigid = (pose.rotation_matrix(), *pose.translation());
        let mut diff = Raster::filled(self.width, self.height, 0.0);
        let mut mask = Mask::filled(self.width, self.height, false);
        for y in 0..self.height {
            for x in 0..self.width {
                let Some((px, p)) = self.target(x, y, &rigid, k) else {
                    continue;
                };
                let interp = bilinear(depth_src.width(), depth_src.height(), px.x, px.y, |ix, iy| depth_src.get(ix, iy));
                if let Some(d_interp) = interp {
                    diff.set(x, y, super::depth_difference(p.z, d_interp));
                    mask.set(x, y, true);
                }
            }
        }
        Ok((diff, mask))
    }
}

/// Coordinates that overshoot the image border by round-off only are pulled
/// back onto it, so a pixel that maps exactly onto the border stays valid.
#[inline]
fn snap_to_border(mut px: Vector2<f64>, width: usize, height: usize) -> Vector2<f64> {
    const TOL: f64 = 1e-9;
    let snap = |v: f64, hi: f64| {
        if v < 0.0 && v > -TOL {
            0.0
        } else if v > hi && v < hi + TOL {
            hi
        } else {
            v
        }
    };
    px.x = snap(px.x, (width - 1) as f64);
    px.y = snap(px.y, (height - 1) as f64);
    px
}

/// Synthesizes the reference view by sampling `src` where each reference pixel
/// lands after back-projection with `depth_ref` and motion `pose_ref_to_src`.
///
/// Pixels without valid depth, behind the source camera, or landing outside the
/// source image are left at zero and cleared in the returned mask.
pub fn warp_image(
    src: &ImageBuffer,
    depth_ref: &DepthMap,
    pose_ref_to_src: &Pose,
    k: &CameraIntrinsics,
) -> Result<(ImageBuffer, ValidMask), ImagingError> {
    BackProjection::new(depth_ref, k).warp(src, pose_ref_to_src, k)
}

/// Per-pixel `|Dⁱ − D'| / (Dⁱ + D')` where `Dⁱ` is the z-depth of the reference
/// point expressed in the source frame and `D'` is `depth_src` bilinearly
/// interpolated at its projection (all four taps must be valid).
pub fn depth_consistency(
    depth_ref: &DepthMap,
    depth_src: &DepthMap,
    pose: &Pose,
    k: &CameraIntrinsics,
) -> Result<(Raster, ValidMask), ImagingError> {
    BackProjection::new(depth_ref, k).depth_consistency(depth_src, pose, k)
}
