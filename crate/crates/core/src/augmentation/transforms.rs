use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::AugmentError;
use crate::imaging::{bilinear, check_dims, gaussian_blur, ImageBuffer};
use crate::warp_loss::DepthMap;

/// Bilinear resampling to exactly `width × height`, aligning pixel centers:
/// output pixel `x` samples the input at `(x + ½)·w_in/w_out − ½`, clamped to
/// the image.
pub fn resize(img: &ImageBuffer, width: usize, height: usize) -> Result<ImageBuffer, AugmentError> {
    if width == 0 || height == 0 {
        return Err(AugmentError::BadSize(width, height));
    }
    let (sw, sh, ch) = (img.width(), img.height(), img.channels());
    let fx = sw as f64 / width as f64;
    let fy = sh as f64 / height as f64;
    let mut data = Vec::with_capacity(width * height * ch);
    for y in 0..height {
        let sy = ((y as f64 + 0.5) * fy - 0.5).clamp(0.0, (sh - 1) as f64);
        for x in 0..width {
            let sx = ((x as f64 + 0.5) * fx - 0.5).clamp(0.0, (sw - 1) as f64);
            for c in 0..ch {
                data.push(bilinear(sw, sh, sx, sy, |ix, iy| Some(img.get(ix, iy, c))).unwrap_or(0.0));
            }
        }
    }
    Ok(ImageBuffer::from_clamped(width, height, ch, data)?)
}

/// Nearest-neighbor resize for depth, so invalid samples never mix with valid ones.
pub fn resize_depth(depth: &DepthMap, width: usize, height: usize) -> Result<DepthMap, AugmentError> {
    if width == 0 || height == 0 {
        return Err(AugmentError::BadSize(width, height));
    }
    let (sw, sh) = (depth.width(), depth.height());
    let fx = sw as f64 / width as f64;
    let fy = sh as f64 / height as f64;
    Ok(DepthMap::from_fn(width, height, |x, y| {
        let sx = (((x as f64 + 0.5) * fx).floor() as usize).min(sw - 1);
        let sy = (((y as f64 + 0.5) * fy).floor() as usize).min(sh - 1);
        depth.data()[sy * sw + sx]
    }))
}

/// Applies a `alpha × alpha` Gaussian of standard deviation `beta`, `gamma` times.
pub fn gaussian_blur_repeated(img: &ImageBuffer, alpha: usize, beta: f64, gamma: usize) -> Result<ImageBuffer, AugmentError> {
    if gamma == 0 {
        return Err(AugmentError::BadParameter("blur repetitions must be at least 1"));
    }
    let mut out = gaussian_blur(img, alpha, beta)?;
    for _ in 1..gamma {
        out = gaussian_blur(&out, alpha, beta)?;
    }
    Ok(out)
}

/// Gain of the vignetting mask at a pixel: `1 − s·(1 − cos⁴θ)` with
/// `tan θ = r / r_corner`, where `r` is the distance from the image center and
/// `r_corner` the center-to-corner distance (the corner sits at θ = 45°).
pub fn vignette_gain(x: usize, y: usize, width: usize, height: usize, strength: f64) -> f64 {
    let (cx, cy) = ((width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0);
    let corner = (cx * cx + cy * cy).sqrt();
    let rho2 = if corner > 0.0 {
        ((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)) / (corner * corner)
    } else {
        0.0
    };
    let cos4 = 1.0 / ((1.0 + rho2) * (1.0 + rho2));
    1.0 - strength * (1.0 - cos4)
}

/// Radial cos⁴ darkening; `strength ∈ [0, 1]`, 0 leaves the image untouched.
pub fn vignette(img: &ImageBuffer, strength: f64) -> Result<ImageBuffer, AugmentError> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(AugmentError::BadParameter("vignette strength must lie in [0, 1]"));
    }
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut data = img.data().to_vec();
    for y in 0..h {
        for x in 0..w {
            let g = vignette_gain(x, y, w, h, strength);
            for c in 0..ch {
                data[(y * w + x) * ch + c] *= g;
            }
        }
    }
    Ok(ImageBuffer::from_clamped(w, h, ch, data)?)
}

/// Source coordinates for the fisheye remap of output pixel `(x, y)`, or
/// `None` when the pixel is discarded.
fn fisheye_source(x: usize, y: usize, w: usize, h: usize, nu: f64) -> Option<(f64, f64)> {
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let radius = w.min(h) as f64 / 2.0;
    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
    let r = (dx * dx + dy * dy).sqrt();
    let rho = r / radius;
    if rho > nu {
        return None;
    }
    if r == 0.0 {
        return Some((cx, cy));
    }
    // equidistant lens: output radius is proportional to the field angle
    // θ = ρ·45°, which a pinhole image places at radius tan θ.
    let src_r = radius * (rho * core::f64::consts::FRAC_PI_4).tan();
    let s = src_r / r;
    Some(((cx + dx * s).clamp(0.0, (w - 1) as f64), (cy + dy * s).clamp(0.0, (h - 1) as f64)))
}

/// Equidistant fisheye remap. The disc of radius `min(w, h)/2` covers field
/// angles up to 45°; pixels beyond `nu` times that radius become black.
pub fn fisheye(img: &ImageBuffer, nu: f64) -> Result<ImageBuffer, AugmentError> {
    if !(nu > 0.0 && nu <= 1.0) {
        return Err(AugmentError::BadRatio(nu));
    }
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut data = alloc::vec![0.0; w * h * ch];
    for y in 0..h {
        for x in 0..w {
            if let Some((sx, sy)) = fisheye_source(x, y, w, h, nu) {
                for c in 0..ch {
                    data[(y * w + x) * ch + c] = bilinear(w, h, sx, sy, |ix, iy| Some(img.get(ix, iy, c))).unwrap_or(0.0);
                }
            }
        }
    }
    Ok(ImageBuffer::from_clamped(w, h, ch, data)?)
}

/// The fisheye remap applied to depth with nearest sampling; discarded
/// pixels become invalid.
pub(crate) fn fisheye_depth(depth: &DepthMap, nu: f64) -> DepthMap {
    let (w, h) = (depth.width(), depth.height());
    DepthMap::from_fn(w, h, |x, y| match fisheye_source(x, y, w, h, nu) {
        Some((sx, sy)) => depth.data()[(sy.round() as usize) * w + sx.round() as usize],
        None => f64::NAN,
    })
}

pub const DEFAULT_MAX_DOF_SIGMA: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofParams {
    /// In-focus normalized depth, in `[0, 1]`.
    pub focus: f64,
    /// Blur sigma in pixels at a normalized defocus of 1.
    pub max_sigma: f64,
    /// Depth mapped to normalized 0 and 1; `None` uses `(0, max valid depth)`.
    pub depth_range: Option<(f64, f64)>,
}

impl DofParams {
    pub fn new(focus: f64) -> Self {
        Self {
            focus,
            max_sigma: DEFAULT_MAX_DOF_SIGMA,
            depth_range: None,
        }
    }
}

/// Shift-variant defocus: each output pixel is a Gaussian-weighted average of
/// its neighborhood with `σ = max_sigma·|d̂ − focus|`, where `d̂` is the pixel's
/// normalized depth (clamped to `[0, 1]`). The kernel is truncated at 3σ and
/// at the image border and renormalized. Pixels without valid depth are copied.
pub fn depth_of_field(img: &ImageBuffer, depth: &DepthMap, params: &DofParams) -> Result<ImageBuffer, AugmentError> {
    check_dims((img.width(), img.height()), (depth.width(), depth.height()))?;
    if !(0.0..=1.0).contains(&params.focus) {
        return Err(AugmentError::BadParameter("focus must lie in [0, 1]"));
    }
    if !(params.max_sigma >= 0.0 && params.max_sigma.is_finite()) {
        return Err(AugmentError::BadParameter("max sigma must be finite and non-negative"));
    }
    let (near, far) = match params.depth_range {
        Some(r) => r,
        None => (0.0, depth.min_max_valid().map(|(_, hi)| hi).unwrap_or(1.0)),
    };
    if !(far > near) {
        return Err(AugmentError::BadParameter("depth range must be increasing"));
    }
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let mut data = img.data().to_vec();
    let mut acc = alloc::vec![0.0; ch];
    for y in 0..h {
        for x in 0..w {
            let Some(d) = depth.get(x, y) else { continue };
            let dn = ((d - near) / (far - near)).clamp(0.0, 1.0);
            let sigma = params.max_sigma * (dn - params.focus).abs();
            if sigma < 1e-3 {
                continue;
            }
            let r = (3.0 * sigma).ceil() as isize;
            let inv = 1.0 / (2.0 * sigma * sigma);
            acc.iter_mut().for_each(|a| *a = 0.0);
            let mut wsum = 0.0;
            for dy in -r..=r {
                let yy = y as isize + dy;
                if yy < 0 || yy >= h as isize {
                    continue;
                }
                for dx in -r..=r {
                    let xx = x as isize + dx;
                    if xx < 0 || xx >= w as isize {
                        continue;
                    }
                    let wt = (-((dx * dx + dy * dy) as f64) * inv).exp();
                    wsum += wt;
                    for (c, a) in acc.iter_mut().enumerate() {
                        *a += wt * img.get(xx as usize, yy as usize, c);
                    }
                }
            }
            for (c, a) in acc.iter().enumerate() {
                data[(y * w + x) * ch + c] = a / wsum;
            }
        }
    }
    Ok(ImageBuffer::from_clamped(w, h, ch, data)?)
}

/// Every `factor`-th item starting with the first; `⌈n / factor⌉` items.
pub fn framerate_subsample<T: Clone>(frames: &[T], factor: usize) -> Result<Vec<T>, AugmentError> {
    if factor == 0 {
        return Err(AugmentError::BadParameter("subsample factor must be at least 1"));
    }
    Ok(frames.iter().step_by(factor).cloned().collect())
}
