use nalgebra::{Vector2, Vector3};
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::GeometryError;

pub type Pixel = Vector2<f64>;

const NEWTON_MAX_ITERS: usize = 50;
const NEWTON_STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CameraModel {
    /// Perspective projection with polynomial radial distortion `1 + k1·r² + k2·r⁴`.
    #[default]
    Pinhole,
    /// Equidistant projection `r_d = θ·(1 + k1·θ² + k2·θ⁴)`.
    Fisheye,
}

/// Intrinsic calibration of a camera.
///
/// Pixel coordinates put the center of pixel `(i, j)` at `(i, j)`. The affine
/// part maps distorted normalized coordinates `(x, y)` to
/// `u = fx·x + skew·y + cx`, `v = fy·y + cy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub model: CameraModel,
    pub fx: f64,
    pub fy: f64,
    pub skew: f64,
    pub cx: f64,
    pub cy: f64,
    pub k1: f64,
    pub k2: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        model: CameraModel,
        fx: f64,
        fy: f64,
        skew: f64,
        cx: f64,
        cy: f64,
        k1: f64,
        k2: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, GeometryError> {
        let k = Self {
            model,
            fx,
            fy,
            skew,
            cx,
            cy,
            k1,
            k2,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// Undistorted pinhole camera with zero skew.
    pub fn ideal(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        Self::new(CameraModel::Pinhole, fx, fy, 0.0, cx, cy, 0.0, 0.0, width, height)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fx.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("fx must be positive"));
        }
        if !(self.fy > 0.0 && self.fy.is_finite()) {
            return Err(GeometryError::InvalidIntrinsics("fy must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics("sensor size must be positive"));
        }
        if ![self.skew, self.cx, self.cy, self.k1, self.k2]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(GeometryError::InvalidIntrinsics("non-finite parameter"));
        }
        Ok(())
    }

    pub fn is_distorted(&self) -> bool {
        self.k1 != 0.0 || self.k2 != 0.0
    }

    /// Projects a camera-frame point (meters) to pixel coordinates.
    pub fn project(&self, point: &Vector3<f64>) -> Result<Pixel, GeometryError> {
        let (xd, yd) = match self.model {
            CameraModel::Pinhole => {
                if !(point.z > 0.0) {
                    return Err(GeometryError::NonPositiveDepth(point.z));
                }
                let x = point.x / point.z;
                let y = point.y / point.z;
                let r2 = x * x + y * y;
                let f = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
                (x * f, y * f)
            }
            CameraModel::Fisheye => {
                let rxy = (point.x * point.x + point.y * point.y).sqrt();
                if rxy == 0.0 {
                    if !(point.z > 0.0) {
                        return Err(GeometryError::NonPositiveDepth(point.z));
                    }
                    (0.0, 0.0)
                } else {
                    let theta = rxy.atan2(point.z);
                    let t2 = theta * theta;
                    let theta_d = theta * (1.0 + self.k1 * t2 + self.k2 * t2 * t2);
                    (theta_d * point.x / rxy, theta_d * point.y / rxy)
                }
            }
        };
        Ok(self.affine(xd, yd))
    }

    /// Back-projects a pixel to the camera-frame point with z-depth `depth`.
    pub fn unproject(&self, pixel: &Pixel, depth: f64) -> Result<Vector3<f64>, GeometryError> {
        if !(depth > 0.0) {
            return Err(GeometryError::NonPositiveDepth(depth));
        }
        let (xd, yd) = self.inverse_affine(pixel);
        let rd = (xd * xd + yd * yd).sqrt();
        let (x, y) = match self.model {
            CameraModel::Pinhole => {
                if rd == 0.0 {
                    (0.0, 0.0)
                } else {
                    let r = invert_radial(rd, self.k1, self.k2)?;
                    (xd * r / rd, yd * r / rd)
                }
            }
            CameraModel::Fisheye => {
                if rd == 0.0 {
                    (0.0, 0.0)
                } else {
                    let theta = invert_radial(rd, self.k1, self.k2)?;
                    if theta >= core::f64::consts::FRAC_PI_2 {
                        return Err(GeometryError::RayBehindCamera(theta));
                    }
                    let r = theta.tan();
                    (xd * r / rd, yd * r / rd)
                }
            }
        };
        Ok(Vector3::new(x * depth, y * depth, depth))
    }

    /// Whether `pixel` is inside the sensor and inside the region where the
    /// radial model is invertible.
    pub fn in_field_of_view(&self, pixel: &Pixel) -> bool {
        pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x <= (self.width - 1) as f64
            && pixel.y <= (self.height - 1) as f64
            && self.unproject(pixel, 1.0).is_ok()
    }

    /// Intrinsics for an image downsampled by averaging 2x2 blocks.
    pub fn half_resolution(&self) -> Self {
        Self {
            fx: self.fx * 0.5,
            fy: self.fy * 0.5,
            skew: self.skew * 0.5,
            cx: (self.cx - 0.5) * 0.5,
            cy: (self.cy - 0.5) * 0.5,
            width: (self.width / 2).max(1),
            height: (self.height / 2).max(1),
            ..*self
        }
    }

    fn affine(&self, xd: f64, yd: f64) -> Pixel {
        Pixel::new(
            self.fx * xd + self.skew * yd + self.cx,
            self.fy * yd + self.cy,
        )
    }

    fn inverse_affine(&self, p: &Pixel) -> (f64, f64) {
        let yd = (p.y - self.cy) / self.fy;
        let xd = (p.x - self.cx - self.skew * yd) / self.fx;
        (xd, yd)
    }
}

/// Largest radius on which `g(r) = r(1 + k1 r² + k2 r⁴)` is increasing.
fn monotone_limit(k1: f64, k2: f64) -> f64 {
    // g'(r) = 1 + 3 k1 s + 5 k2 s², s = r²
    let (a, b, c) = (5.0 * k2, 3.0 * k1, 1.0);
    let mut s_min = f64::INFINITY;
    if a == 0.0 {
        if b < 0.0 {
            s_min = -c / b;
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc >= 0.0 {
            let sq = disc.sqrt();
            for s in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                if s > 0.0 && s < s_min {
                    s_min = s;
                }
            }
        }
    }
    s_min.sqrt()
}

/// Solves `r(1 + k1 r² + k2 r⁴) = target` for `r ≥ 0` with damped Newton steps.
fn invert_radial(target: f64, k1: f64, k2: f64) -> Result<f64, GeometryError> {
    if k1 == 0.0 && k2 == 0.0 {
        return Ok(target);
    }
    let g = |r: f64| {
        let r2 = r * r;
        r * (1.0 + k1 * r2 + k2 * r2 * r2)
    };
    let dg = |r: f64| {
        let r2 = r * r;
        1.0 + 3.0 * k1 * r2 + 5.0 * k2 * r2 * r2
    };
    let r_max = monotone_limit(k1, k2);
    if r_max.is_finite() && target > g(r_max) {
        return Err(GeometryError::DistortionInversionFailed { radius: target });
    }
    let mut r = if r_max.is_finite() { target.min(r_max) } else { target };
    for _ in 0..NEWTON_MAX_ITERS {
        let d = dg(r);
        if !(d > 0.0) {
            // Sitting on the fold; back off toward the origin.
            r *= 0.5;
            continue;
        }
        let step = (g(r) - target) / d;
        let mut next = r - step;
        if next < 0.0 {
            next = 0.5 * r;
        } else if next > r_max {
            next = 0.5 * (r + r_max);
        }
        let moved = (next - r).abs();
        r = next;
        if moved < NEWTON_STEP_TOL {
            return Ok(r);
        }
    }
    Err(GeometryError::DistortionInversionFailed { radius: target })
}

/// Calibrations of the capsule and endoscope cameras used with the dataset
/// (pinhole model, 480x640 sensors reported as height x width).
impl CameraIntrinsics {
    pub fn high_cam() -> Self {
        Self::table(957.4119, 959.3861, 5.6242, 282.1921, 170.7316, 0.2533, -0.2085, 640, 480)
    }

    pub fn low_cam() -> Self {
        Self::table(816.8598, 814.8223, 0.2072, 308.2864, 158.3971, 0.2345, -0.7908, 640, 480)
    }

    pub fn high_modified() -> Self {
        Self::table(603.5105, 807.6887, 4.2831, 173.7160, 133.7022, 0.2645, -0.4186, 400, 400)
    }

    pub fn low_modified() -> Self {
        Self::table(317.6319, 423.1068, -0.3334, 121.3764, 82.5754, 0.2265, -0.8877, 250, 250)
    }

    pub fn miro_cam() -> Self {
        Self::table(156.0418, 155.7529, 0.0, 178.5604, 181.8043, -0.2486, 0.0614, 320, 320)
    }

    pub fn pill_cam1() -> Self {
        Self::table(74.2002, 74.4184, 0.0, 129.9724, 129.1209, 0.1994, -0.1279, 256, 256)
    }

    pub fn pill_cam2() -> Self {
        Self::table(76.0535, 75.4967, 0.0, 130.9419, 128.4882, 0.1985, -0.1317, 256, 256)
    }

    #[allow(clippy::too_many_arguments)]
    const fn table(fx: f64, fy: f64, skew: f64, cx: f64, cy: f64, k1: f64, k2: f64, width: u32, height: u32) -> Self {
        Self {
            model: CameraModel::Pinhole,
            fx,
            fy,
            skew,
            cx,
            cy,
            k1,
            k2,
            width,
            height,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn optical_axis_hits_principal_point() {
        let k = CameraIntrinsics::high_cam();
        let p = k.project(&Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((p.x - 282.1921).abs() < 1e-12);
        assert!((p.y - 170.7316).abs() < 1e-12);
    }

    #[test]
    fn undistorted_pinhole_offset() {
        let k = CameraIntrinsics::ideal(500.0, 480.0, 320.0, 240.0, 640, 480).unwrap();
        let p = k.project(&Vector3::new(0.1, 0.0, 1.0)).unwrap();
        assert!((p.x - (320.0 + 0.1 * 500.0)).abs() < 1e-12);
        assert!((p.y - 240.0).abs() < 1e-12);
    }

    #[test]
    fn pinhole_rejects_points_behind() {
        let k = CameraIntrinsics::high_cam();
        assert!(matches!(
            k.project(&Vector3::new(0.0, 0.0, 0.0)),
            Err(GeometryError::NonPositiveDepth(_))
        ));
        assert!(k.project(&Vector3::new(0.1, 0.0, -1.0)).is_err());
    }

    #[test]
    fn project_matches_scalar_recomputation() {
        let k = CameraIntrinsics::miro_cam();
        for i in 0..10 {
            for j in 0..10 {
                let (x, y, z) = (-0.6 + 0.13 * i as f64, -0.55 + 0.12 * j as f64, 1.0 + 0.05 * i as f64);
                // step-by-step scalar oracle
                let xn = x / z;
                let yn = y / z;
                let r2 = xn * xn + yn * yn;
                let r4 = r2 * r2;
                let radial = 1.0 + (-0.2486) * r2 + 0.0614 * r4;
                let u = 156.0418 * (xn * radial) + 0.0 * (yn * radial) + 178.5604;
                let v = 155.7529 * (yn * radial) + 181.8043;
                let p = k.project(&Vector3::new(x, y, z)).unwrap();
                assert!((p.x - u).abs() < 1e-9 && (p.y - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn principal_point_unprojects_to_axis() {
        let k = CameraIntrinsics::miro_cam();
        let x = k.unproject(&Pixel::new(k.cx, k.cy), 2.0).unwrap();
        assert_eq!(x, Vector3::new(0.0, 0.0, 2.0));
    }

    #[test]
    fn zero_distortion_inverse_is_closed_form() {
        let k = CameraIntrinsics::ideal(400.0, 410.0, 100.0, 90.0, 200, 180).unwrap();
        let x = k.unproject(&Pixel::new(140.0, 131.0), 3.0).unwrap();
        assert_eq!(x, Vector3::new(40.0 / 400.0 * 3.0, 41.0 / 410.0 * 3.0, 3.0));
        assert_eq!(invert_radial(0.37, 0.0, 0.0), Ok(0.37));
    }

    #[test]
    fn high_cam_roundtrip_random_pixels() {
        let k = CameraIntrinsics::high_cam();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut worst: f64 = 0.0;
        for _ in 0..2000 {
            let p = Pixel::new(rng.random_range(0.0..639.0), rng.random_range(0.0..479.0));
            let d = rng.random_range(0.01..5.0);
            let x = k.unproject(&p, d).unwrap();
            let q = k.project(&x).unwrap();
            worst = worst.max((q - p).norm());
        }
        assert!(worst < 1e-6, "worst {worst}");
    }

    #[test]
    fn fold_of_distortion_is_reported() {
        // PillCam's k2 < 0 makes the radial map non-monotone past r ≈ 1.34.
        let k = CameraIntrinsics::pill_cam1();
        assert!(matches!(
            k.unproject(&Pixel::new(0.0, 0.0), 1.0),
            Err(GeometryError::DistortionInversionFailed { .. })
        ));
        assert!(!k.in_field_of_view(&Pixel::new(0.0, 0.0)));
        assert!(k.in_field_of_view(&Pixel::new(128.0, 128.0)));
    }

    #[test]
    fn fisheye_roundtrip_and_center() {
        let k = CameraIntrinsics::new(CameraModel::Fisheye, 150.0, 150.0, 0.0, 160.0, 160.0, 0.02, -0.01, 320, 320).unwrap();
        let c = k.project(&Vector3::new(0.0, 0.0, 3.0)).unwrap();
        assert_eq!(c, Pixel::new(160.0, 160.0));
        for (u, v) in [(10.0, 20.0), (300.0, 310.0), (160.0, 0.0), (77.7, 201.3)] {
            let p = Pixel::new(u, v);
            let x = k.unproject(&p, 0.5).unwrap();
            assert!((k.project(&x).unwrap() - p).norm() < 1e-6);
        }
    }

    #[test]
    fn validation_rejects_bad_focal() {
        assert!(CameraIntrinsics::ideal(0.0, 1.0, 0.0, 0.0, 10, 10).is_err());
        assert!(CameraIntrinsics::ideal(1.0, 1.0, 0.0, 0.0, 0, 10).is_err());
    }

    #[test]
    fn half_resolution_keeps_pixel_centers() {
        let k = CameraIntrinsics::ideal(100.0, 100.0, 31.5, 31.5, 64, 48).unwrap();
        let h = k.half_resolution();
        let x = Vector3::new(0.1, -0.05, 1.0);
        let p = k.project(&x).unwrap();
        let q = h.project(&x).unwrap();
        // full-res pixels 2i and 2i+1 average into half-res pixel i
        assert!(((p.x - 0.5) / 2.0 - q.x).abs() < 1e-12);
        assert!(((p.y - 0.5) / 2.0 - q.y).abs() < 1e-12);
        assert_eq!((h.width, h.height), (32, 24));
    }
}
