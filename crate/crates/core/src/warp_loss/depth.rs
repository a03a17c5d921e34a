use alloc::vec::Vec;

use crate::imaging::{ImagingError, Mask, Raster};

/// Dense depth (meters) with an explicit validity raster. A sample is valid
/// when it is finite and strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    depth: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, depth: Vec<f64>) -> Result<Self, ImagingError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyImage);
        }
        if depth.len() != width * height {
            return Err(ImagingError::BadLength {
                expected: width * height,
                got: depth.len(),
            });
        }
        let valid = depth.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Ok(Self {
            width,
            height,
            depth,
            valid,
        })
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Self {
        Self::from_fn(width, height, |_, _| depth)
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut depth = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                depth.push(f(x, y));
            }
        }
        let valid = depth.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Self {
            width,
            height,
            depth,
            valid,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Raw samples, including invalid ones.
    pub fn data(&self) -> &[f64] {
        &self.depth
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        if self.valid[i] {
            Some(self.depth[i])
        } else {
            None
        }
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[y * self.width + x]
    }

    pub fn valid_mask(&self) -> Mask {
        Mask::new(self.width, self.height, self.valid.clone()).expect("sizes agree")
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid_count() as f64 / (self.width * self.height) as f64
    }

    pub fn mean_valid(&self) -> Option<f64> {
        let n = self.valid_count();
        if n == 0 {
            return None;
        }
        let sum: f64 = self
            .depth
            .iter()
            .zip(&self.valid)
            .filter(|(_, v)| **v)
            .map(|(d, _)| *d)
            .sum();
        Some(sum / n as f64)
    }

    pub fn min_max_valid(&self) -> Option<(f64, f64)> {
        let mut it = self.depth.iter().zip(&self.valid).filter(|(_, v)| **v).map(|(d, _)| *d);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), d| (lo.min(d), hi.max(d))))
    }

    /// Invalid samples become 0.
    pub fn to_raster(&self) -> Raster {
        Raster::from_fn(self.width, self.height, |x, y| self.get(x, y).unwrap_or(0.0))
    }

    /// 2x2 block average over valid samples; a block with no valid sample is invalid.
    pub fn half_resolution(&self) -> Self {
        let (w, h) = ((self.width / 2).max(1), (self.height / 2).max(1));
        Self::from_fn(w, h, |x, y| {
            let mut sum = 0.0;
            let mut n = 0.0;
            for dy in 0..2 {
                for dx in 0..2 {
                    let (sx, sy) = (2 * x + dx, 2 * y + dy);
                    if sx < self.width && sy < self.height {
                        if let Some(d) = self.get(sx, sy) {
                            sum += d;
                            n += 1.0;
                        }
                    }
                }
            }
            if n > 0.0 {
                sum / n
            } else {
                f64::NAN
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validity_rules() {
        let d = DepthMap::new(2, 2, alloc::vec![1.0, 0.0, -1.0, f64::NAN]).unwrap();
        assert_eq!(d.get(0, 0), Some(1.0));
        assert_eq!(d.get(1, 0), None);
        assert_eq!(d.get(0, 1), None);
        assert_eq!(d.get(1, 1), None);
        assert_eq!(d.valid_count(), 1);
        assert_eq!(d.mean_valid(), Some(1.0));
    }

    #[test]
    fn half_resolution_averages_valid() {
        let d = DepthMap::new(2, 2, alloc::vec![1.0, 3.0, 0.0, f64::NAN]).unwrap();
        let h = d.half_resolution();
        assert_eq!(h.get(0, 0), Some(2.0));
    }
}
