//! Specular highlight suppression: Otsu detection of the bright class,
//! dilation, then diffusion inpainting.

use super::ReconError;
use crate::imaging::{inpaint_diffusion, otsu_threshold, ImageBuffer, Mask};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpecularOptions {
    /// Highlights must also exceed this intensity; stops Otsu from splitting
    /// ordinary tissue texture when no reflections are present.
    pub min_level: f64,
    pub dilation: usize,
    pub inpaint_iterations: usize,
}

impl Default for SpecularOptions {
    fn default() -> Self {
        Self {
            min_level: 0.8,
            dilation: 2,
            inpaint_iterations: 2000,
        }
    }
}

/// Returns the inpainted image and the mask of replaced pixels.
pub fn suppress_specular(img: &ImageBuffer, opts: &SpecularOptions) -> Result<(ImageBuffer, Mask), ReconError> {
    let gray = img.to_gray();
    let t = otsu_threshold(&gray)?.max(opts.min_level);
    let mask = Mask::from_fn(img.width(), img.height(), |x, y| gray.get(x, y, 0) > t).dilate(opts.dilation);
    let out = inpaint_diffusion(img, &mask, opts.inpaint_iterations)?;
    Ok((out, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::ImagingError;

    fn tissue(x: usize, y: usize) -> f64 {
        0.35 + 0.1 * (0.3 * x as f64).sin() * (0.25 * y as f64).cos()
    }

    #[test]
    fn no_highlights_leaves_image_alone() {
        let img = ImageBuffer::from_fn_gray(48, 48, tissue);
        let (out, mask) = suppress_specular(&img, &SpecularOptions::default()).unwrap();
        assert!(mask.is_empty());
        assert_eq!(out, img);
    }

    #[test]
    fn blobs_are_masked_and_removed() {
        let blobs = [(12.0, 14.0, 3.5), (35.0, 30.0, 5.0)];
        let in_blob = |x: usize, y: usize| {
            blobs
                .iter()
                .any(|(cx, cy, r)| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r)
        };
        let img = ImageBuffer::from_fn_gray(48, 48, |x, y| if in_blob(x, y) { 1.0 } else { tissue(x, y) });
        let (out, mask) = suppress_specular(&img, &SpecularOptions::default()).unwrap();
        let (mut total, mut hit) = (0, 0);
        for y in 0..48 {
            for x in 0..48 {
                if in_blob(x, y) {
                    total += 1;
                    hit += mask.get(x, y) as usize;
                    assert!(out.get(x, y, 0) < 0.6);
                } else if !mask.get(x, y) {
                    assert_eq!(out.get(x, y, 0), img.get(x, y, 0));
                }
            }
        }
        assert!(hit as f64 >= 0.95 * total as f64);
    }

    #[test]
    fn white_image_is_degenerate() {
        let img = ImageBuffer::filled(8, 8, 3, 1.0);
        assert!(matches!(
            suppress_specular(&img, &SpecularOptions::default()),
            Err(ReconError::Imaging(ImagingError::DegenerateHistogram { .. }))
        ));
    }
}
