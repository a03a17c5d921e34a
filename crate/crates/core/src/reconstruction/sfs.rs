//! Tsai–Shah shape from shading: per-pixel Newton iterations on the
//! linearized Lambertian reflectance with discrete depth gradients.

use alloc::vec::Vec;

use nalgebra::Vector3;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::ReconError;
use crate::imaging::{ImageBuffer, Raster};
use crate::warp_loss::DepthMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfacePrior {
    /// Surface bulges towards the camera.
    Convex,
    /// Surface recedes from the camera (e.g. looking down a lumen).
    Concave,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfsOptions {
    /// Unit vector towards the light, camera coordinates.
    pub light: Vector3<f64>,
    pub iterations: usize,
    pub prior: SurfacePrior,
    /// Tilt of the auxiliary lights used when the light is (nearly) on the
    /// optical axis.
    pub frontal_tilt: f64,
}

impl Default for SfsOptions {
    fn default() -> Self {
        Self {
            light: Vector3::z(),
            iterations: 200,
            prior: SurfacePrior::Convex,
            frontal_tilt: 0.2,
        }
    }
}

const NOISE_VAR: f64 = 1e-8;
const INITIAL_VAR: f64 = 0.01;

/// Tsai–Shah iterations for light gradient `(ps, qs)`, returning the height
/// map Z. The Newton step uses the reflectance derivative for `(ds, dq)`,
/// which differs from `(ps, qs)` only for frontal light (see
/// [`frontal_height`]).
fn tsai_shah_height(e: &Raster, light: (f64, f64), slope: (f64, f64), iterations: usize) -> Raster {
    let (w, h) = (e.width(), e.height());
    let (ps, qs) = light;
    let (ds, dq) = slope;
    let norm_l = (1.0 + ps * ps + qs * qs).sqrt();
    let norm_d = (1.0 + ds * ds + dq * dq).sqrt();
    let mut z = Raster::filled(w, h, 0.0);
    let mut var = Raster::filled(w, h, INITIAL_VAR);
    for _ in 0..iterations {
        let prev = z.clone();
        for y in 0..h {
            for x in 0..w {
                let zc = prev.get(x, y);
                let p = if x > 0 { zc - prev.get(x - 1, y) } else { 0.0 };
                let q = if y > 0 { zc - prev.get(x, y - 1) } else { 0.0 };
                let n = (1.0 + p * p + q * q).sqrt();
                let r = ((1.0 + p * ps + q * qs) / (n * norm_l)).max(0.0);
                let f = e.get(x, y) - r;
                let dr = (ds + dq) / (n * norm_d) - (p + q) * (p * ds + q * dq + 1.0) / (n * n * n * norm_d);
                let s = var.get(x, y);
                let k = s * dr / (NOISE_VAR + dr * dr * s);
                var.set(x, y, (1.0 - k * dr) * s);
                z.set(x, y, zc + k * f);
            }
        }
    }
    z
}

fn normalized_intensity(img: &ImageBuffer) -> Option<Raster> {
    let g = img.channel(0);
    let (lo, hi) = g
        .data()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    if !(hi - lo > 1e-12) {
        return None;
    }
    // snapped to a 2^-24 grid so round-off from an affine rescaling of the
    // input cannot change the result
    let q = (1u64 << 24) as f64;
    Some(Raster::from_fn(g.width(), g.height(), |x, y| {
        ((g.get(x, y) - lo) / (hi - lo) * q).round() / q
    }))
}

/// Relative depth (positive, larger = farther) from a single grayscale image.
///
/// Intensities are min-max normalized first, so any increasing affine change
/// of the input gives the same result. A uniform image yields a flat map.
pub fn tsai_shah_sfs(img: &ImageBuffer, opts: &SfsOptions) -> Result<DepthMap, ReconError> {
    img.require_gray()?;
    let n = opts.light.norm();
    if !((n - 1.0).abs() < 1e-6) || !(opts.light.z > 0.0) {
        return Err(ReconError::NonUnitLight(n));
    }
    if !(opts.frontal_tilt > 0.0) {
        return Err(ReconError::BadParameter("frontal tilt must be positive"));
    }
    let (w, h) = (img.width(), img.height());
    let Some(e) = normalized_intensity(img) else {
        return Ok(DepthMap::constant(w, h, 1.0));
    };
    let light = (-opts.light.x / opts.light.z, -opts.light.y / opts.light.z);
    let height = if (light.0 + light.1).abs() > 1e-3 {
        tsai_shah_height(&e, light, light, opts.iterations)
    } else {
        frontal_height(&e, light, opts)
    };
    let zmax = height.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DepthMap::from_fn(w, h, |x, y| 1.0 + zmax - height.get(x, y)))
}

fn flipped(r: &Raster, fx: bool, fy: bool) -> Raster {
    let (w, h) = (r.width(), r.height());
    Raster::from_fn(w, h, |x, y| {
        r.get(if fx { w - 1 - x } else { x }, if fy { h - 1 - y } else { y })
    })
}

/// With `ps + qs ≈ 0` the reflectance derivative vanishes on the flat
/// initial surface and the iteration never leaves it. The residual keeps
/// the true light but the step direction comes from a light tilted by
/// `frontal_tilt`; since the tilt orients the one-sided differences, the
/// image is processed in all four mirrorings and the results are merged
/// according to the surface prior.
fn frontal_height(e: &Raster, light: (f64, f64), opts: &SfsOptions) -> Raster {
    let t = opts.frontal_tilt;
    let runs: Vec<Raster> = [(false, false), (true, false), (false, true), (true, true)]
        .iter()
        .map(|&(fx, fy)| {
            let l = (if fx { -light.0 } else { light.0 }, if fy { -light.1 } else { light.1 });
            let z = tsai_shah_height(&flipped(e, fx, fy), l, (l.0 + t, l.1 + t), opts.iterations);
            flipped(&z, fx, fy)
        })
        .collect();
    Raster::from_fn(e.width(), e.height(), |x, y| {
        let vals = runs.iter().map(|r| r.get(x, y));
        match opts.prior {
            SurfacePrior::Convex => vals.fold(f64::INFINITY, f64::min),
            SurfacePrior::Concave => vals.fold(f64::NEG_INFINITY, f64::max),
        }
    })
}
