//! Raster primitives shared by the photometric code.
//!
//! Intensities are `f64` in `[0, 1]`; 8-bit sources are divided by 255 when
//! they are read. Every convolution in this module replicates edge pixels.

mod filter;
mod inpaint;
mod otsu;
mod sample;
mod ssim;

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

pub use filter::{gaussian_blur, gaussian_kernel, gradient, GradientField};
pub(crate) use filter::convolve_separable;
pub use inpaint::inpaint_diffusion;
pub use otsu::{otsu_bin, otsu_threshold, Histogram};
pub use sample::{bilinear, bilinear_sample, bilinear_sample_channel};
pub use ssim::{ssim, ssim_masked, SSIM_C1, SSIM_C2};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImagingError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("expected {expected} channel(s), got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("unsupported channel count {0} (must be 1 or 3)")]
    UnsupportedChannels(usize),
    #[error("buffer length {got} does not match {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("image must be at least 1x1")]
    EmptyImage,
    #[error("sample {0} is outside [0, 1] or not finite")]
    OutOfRange(f64),
    #[error("kernel size must be odd and positive with sigma > 0 (size {size}, sigma {sigma})")]
    BadKernel { size: usize, sigma: f64 },
    #[error("image smaller than the {0}x{0} window")]
    ImageTooSmall(usize),
    #[error("histogram is degenerate (constant image at {value})")]
    DegenerateHistogram { value: f64 },
    #[error("inpainting mask covers the whole image")]
    MaskCoversEverything,
    #[error("mask is empty")]
    EmptyMask,
}

/// Dense scalar field without a range constraint (depths, flow components,
/// gradients, loss maps).
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage);
        }
        if data.len() != width * height {
            return Err(ImagingError::BadLength {
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    /// Edge-replicating accessor.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let xc = x.clamp(0, self.width as isize - 1) as usize;
        let yc = y.clamp(0, self.height as isize - 1) as usize;
        self.data[yc * self.width + xc]
    }

    pub fn same_size(&self, width: usize, height: usize) -> Result<(), ImagingError> {
        check_dims((self.width, self.height), (width, height))
    }
}

/// Row-major image with 1 or 3 interleaved channels, samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage);
        }
        if channels != 1 && channels != 3 {
            return Err(ImagingError::UnsupportedChannels(channels));
        }
        if data.len() != width * height * channels {
            return Err(ImagingError::BadLength {
                expected: width * height * channels,
                got: data.len(),
            });
        }
        if let Some(&bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImagingError::OutOfRange(bad));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Like [`ImageBuffer::new`] but clamps samples into `[0, 1]` (NaN becomes 0).
    pub fn from_clamped(width: usize, height: usize, channels: usize, mut data: Vec<f64>) -> Result<Self, ImagingError> {
        for v in &mut data {
            *v = clamp_unit(*v);
        }
        Self::new(width, height, channels, data)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        let value = clamp_unit(value);
        Self {
            width: width.max(1),
            height: height.max(1),
            channels: if channels == 3 { 3 } else { 1 },
            data: vec![value; width.max(1) * height.max(1) * if channels == 3 { 3 } else { 1 }],
        }
    }

    /// Grayscale image from a function of pixel coordinates; values are clamped.
    pub fn from_fn_gray(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(clamp_unit(f(x, y)));
            }
        }
        Self {
            width,
            height,
            channels: 1,
            data,
        }
    }

    pub fn from_raster(r: &Raster) -> Self {
        Self {
            width: r.width,
            height: r.height,
            channels: 1,
            data: r.data.iter().map(|v| clamp_unit(*v)).collect(),
        }
    }

    pub(crate) fn from_raw(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * channels);
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len_pixels(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f64) {
        self.data[(y * self.width + x) * self.channels + c] = clamp_unit(v);
    }

    pub fn channel(&self, c: usize) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().skip(c).step_by(self.channels).copied().collect(),
        }
    }

    /// Builds an image from per-channel rasters (all the same size), clamping samples.
    pub fn from_channels(planes: &[Raster]) -> Result<Self, ImagingError> {
        let first = planes.first().ok_or(ImagingError::UnsupportedChannels(0))?;
        let channels = planes.len();
        if channels != 1 && channels != 3 {
            return Err(ImagingError::UnsupportedChannels(channels));
        }
        for p in planes {
            p.same_size(first.width, first.height)?;
        }
        let n = first.width * first.height;
        let mut data = Vec::with_capacity(n * channels);
        for i in 0..n {
            for p in planes {
                data.push(clamp_unit(p.data[i]));
            }
        }
        Ok(Self::from_raw(first.width, first.height, channels, data))
    }

    /// ITU-R BT.601 luma for RGB input; a copy for grayscale input.
    pub fn to_gray(&self) -> ImageBuffer {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(3)
            .map(|px| clamp_unit(0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]))
            .collect();
        Self::from_raw(self.width, self.height, 1, data)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ImageBuffer {
        Self::from_raw(
            self.width,
            self.height,
            self.channels,
            self.data.iter().map(|v| clamp_unit(f(*v))).collect(),
        )
    }

    pub fn same_shape(&self, other: &ImageBuffer) -> Result<(), ImagingError> {
        check_dims((self.width, self.height), (other.width, other.height))?;
        if self.channels != other.channels {
            return Err(ImagingError::ChannelMismatch {
                expected: self.channels,
                got: other.channels,
            });
        }
        Ok(())
    }

    pub fn require_gray(&self) -> Result<(), ImagingError> {
        if self.channels != 1 {
            return Err(ImagingError::ChannelMismatch {
                expected: 1,
                got: self.channels,
            });
        }
        Ok(())
    }
}

/// Boolean raster (valid pixels, inpainting regions, specular highlights).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self, ImagingError> {
        if data.len() != width * height {
            return Err(ImagingError::BadLength {
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|v| *v)
    }

    pub fn and(&self, other: &Mask) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| *a && *b).collect(),
        }
    }

    /// Grows the mask by a Euclidean disc of `radius` pixels.
    pub fn dilate(&self, radius: usize) -> Mask {
        let r = radius as isize;
        let mut out = self.clone();
        for y in 0..self.height as isize {
            for x in 0..self.width as isize {
                if !self.get(x as usize, y as usize) {
                    continue;
                }
                for dy in -r..=r {
                    for dx in -r..=r {
                        if dx * dx + dy * dy > r * r {
                            continue;
                        }
                        let (nx, ny) = (x + dx, y + dy);
                        if nx >= 0 && ny >= 0 && nx < self.width as isize && ny < self.height as isize {
                            out.set(nx as usize, ny as usize, true);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn same_size(&self, width: usize, height: usize) -> Result<(), ImagingError> {
        check_dims((self.width, self.height), (width, height))
    }
}

pub(crate) fn check_dims(a: (usize, usize), b: (usize, usize)) -> Result<(), ImagingError> {
    if a != b {
        return Err(ImagingError::DimensionMismatch(a.0, a.1, b.0, b.1));
    }
    Ok(())
}

#[inline]
pub(crate) fn clamp_unit(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_validates() {
        assert!(ImageBuffer::new(2, 2, 1, vec![0.0; 4]).is_ok());
        assert_eq!(
            ImageBuffer::new(2, 2, 1, vec![0.0; 3]),
            Err(ImagingError::BadLength { expected: 4, got: 3 })
        );
        assert!(matches!(ImageBuffer::new(1, 1, 1, vec![1.5]), Err(ImagingError::OutOfRange(_))));
        assert!(matches!(ImageBuffer::new(1, 1, 2, vec![0.0; 2]), Err(ImagingError::UnsupportedChannels(2))));
    }

    #[test]
    fn luma_weights() {
        let img = ImageBuffer::new(1, 1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        assert!((img.to_gray().get(0, 0, 0) - 0.299).abs() < 1e-15);
        let img = ImageBuffer::new(1, 1, 3, vec![0.2, 0.4, 0.6]).unwrap();
        let expected = 0.299 * 0.2 + 0.587 * 0.4 + 0.114 * 0.6;
        assert!((img.to_gray().get(0, 0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn dilate_disc() {
        let mut m = Mask::filled(7, 7, false);
        m.set(3, 3, true);
        let d = m.dilate(2);
        assert_eq!(d.count(), 13);
        assert!(d.get(1, 3) && d.get(3, 5) && !d.get(1, 1));
    }
}
