use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::{ImageBuffer, ImagingError, Raster};

/// Per-pixel forward differences. The last column of `gx` and the last row of
/// `gy` are zero (edge replication).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub gx: Raster,
    pub gy: Raster,
}

pub fn gradient(r: &Raster) -> GradientField {
    let (w, h) = (r.width(), r.height());
    let gx = Raster::from_fn(w, h, |x, y| if x + 1 < w { r.get(x + 1, y) - r.get(x, y) } else { 0.0 });
    let gy = Raster::from_fn(w, h, |x, y| if y + 1 < h { r.get(x, y + 1) - r.get(x, y) } else { 0.0 });
    GradientField { gx, gy }
}

/// Normalized, sampled 1D Gaussian of odd length `size`.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Result<Vec<f64>, ImagingError> {
    if size == 0 || size % 2 == 0 || !(sigma > 0.0) || !sigma.is_finite() {
        return Err(ImagingError::BadKernel { size, sigma });
    }
    let r = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - r;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    Ok(k)
}

/// Separable Gaussian blur with edge replication, applied per channel.
pub fn gaussian_blur(img: &ImageBuffer, size: usize, sigma: f64) -> Result<ImageBuffer, ImagingError> {
    let k = gaussian_kernel(size, sigma)?;
    let planes: Vec<Raster> = (0..img.channels())
        .map(|c| convolve_separable(&img.channel(c), &k))
        .collect();
    ImageBuffer::from_channels(&planes)
}

pub(crate) fn convolve_separable(r: &Raster, k: &[f64]) -> Raster {
    let half = (k.len() / 2) as isize;
    let (w, h) = (r.width(), r.height());
    let horiz = Raster::from_fn(w, h, |x, y| {
        k.iter()
            .enumerate()
            .map(|(i, kv)| kv * r.get_clamped(x as isize + i as isize - half, y as isize))
            .sum()
    });
    Raster::from_fn(w, h, |x, y| {
        k.iter()
            .enumerate()
            .map(|(i, kv)| kv * horiz.get_clamped(x as isize, y as isize + i as isize - half))
            .sum()
    })
}
