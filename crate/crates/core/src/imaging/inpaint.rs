use alloc::vec::Vec;


use super::{check_dims, ImageBuffer, ImagingError, Mask, Raster};

const SOR_OMEGA: f64 = 1.8;
const CONVERGED_STEP: f64 = 1e-13;

/// Fills masked pixels with the harmonic (discrete Laplace) interpolation of
/// their unmasked surroundings; unmasked pixels are copied unchanged.
///
/// Successive over-relaxation starting from the current masked values, stopped
/// after `max_iters` sweeps or once no update exceeds 1e-13. Neighbors outside
/// the image are ignored (zero-flux border).
pub fn inpaint_diffusion(img: &ImageBuffer, mask: &Mask, max_iters: usize) -> Result<ImageBuffer, ImagingError> {
    check_dims((img.width(), img.height()), (mask.width(), mask.height()))?;
    let masked = mask.count();
    if masked == 0 {
        return Ok(img.clone());
    }
    if masked == img.len_pixels() {
        return Err(ImagingError::MaskCoversEverything);
    }
    let (w, h) = (img.width(), img.height());
    let targets: Vec<(usize, usize)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|(x, y)| mask.get(*x, *y))
        .collect();
    let mut planes: Vec<Raster> = (0..img.channels()).map(|c| img.channel(c)).collect();
    for plane in &mut planes {
        relax(plane, &targets, max_iters);
    }
    ImageBuffer::from_channels(&planes)
}

fn relax(r: &mut Raster, targets: &[(usize, usize)], max_iters: usize) {
    let (w, h) = (r.width(), r.height());
    for _ in 0..max_iters {
        let mut largest: f64 = 0.0;
        for &(x, y) in targets {
            let mut sum = 0.0;
            let mut n = 0.0;
            if x > 0 {
                sum += r.get(x - 1, y);
                n += 1.0;
            }
            if x + 1 < w {
                sum += r.get(x + 1, y);
                n += 1.0;
            }
            if y > 0 {
                sum += r.get(x, y - 1);
                n += 1.0;
            }
            if y + 1 < h {
                sum += r.get(x, y + 1);
                n += 1.0;
            }
            if n == 0.0 {
                continue;
            }
            let old = r.get(x, y);
            let update = SOR_OMEGA * (sum / n - old);
            r.set(x, y, old + update);
            largest = largest.max(update.abs());
        }
        if largest < CONVERGED_STEP {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_mask_is_noop() {
        let img = ImageBuffer::from_fn_gray(5, 5, |x, y| (x * y) as f64 / 16.0);
        let out = inpaint_diffusion(&img, &Mask::filled(5, 5, false), 10).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn full_mask_rejected() {
        let img = ImageBuffer::filled(3, 3, 1, 0.5);
        assert_eq!(
            inpaint_diffusion(&img, &Mask::filled(3, 3, true), 10),
            Err(ImagingError::MaskCoversEverything)
        );
    }

    #[test]
    fn single_pixel_takes_surrounding_constant() {
        let mut img = ImageBuffer::filled(5, 5, 1, 0.3);
        img.set(2, 2, 0, 1.0);
        let mut m = Mask::filled(5, 5, false);
        m.set(2, 2, true);
        let out = inpaint_diffusion(&img, &m, 200).unwrap();
        assert!((out.get(2, 2, 0) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn strip_in_ramp_is_filled_linearly() {
        let ramp = |x: usize| 0.1 + 0.8 * x as f64 / 31.0;
        let mut img = ImageBuffer::from_fn_gray(32, 24, |x, _| ramp(x));
        let m = Mask::from_fn(32, 24, |x, _| (12..18).contains(&x));
        for y in 0..24 {
            for x in 12..18 {
                img.set(x, y, 0, 1.0);
            }
        }
        let out = inpaint_diffusion(&img, &m, 5000).unwrap();
        for y in 0..24 {
            for x in 0..32 {
                assert!((out.get(x, y, 0) - ramp(x)).abs() < 1e-3, "({x},{y})");
            }
        }
        let again = inpaint_diffusion(&out, &m, 5000).unwrap();
        for (a, b) in again.data().iter().zip(out.data()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
