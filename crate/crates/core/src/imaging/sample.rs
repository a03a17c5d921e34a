#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::ImageBuffer;

/// Bilinear interpolation over a `width x height` grid read through `get`.
///
/// Returns `None` when `(x, y)` lies outside `[0, width-1] x [0, height-1]` or
/// when a neighbor that carries non-zero weight is reported invalid by `get`.
/// Integer coordinates therefore only touch the pixel itself.
#[inline]
pub fn bilinear(
    width: usize,
    height: usize,
    x: f64,
    y: f64,
    get: impl Fn(usize, usize) -> Option<f64>,
) -> Option<f64> {
    if !(x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64) {
        return None;
    }
    let x0 = (x.floor() as usize).min(width - 1);
    let y0 = (y.floor() as usize).min(height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let mut acc = 0.0;
    for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
        if wy == 0.0 {
            continue;
        }
        for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
            if wx == 0.0 {
                continue;
            }
            acc += wx * wy * get(x0 + dx, y0 + dy)?;
        }
    }
    Some(acc)
}

/// Bilinear sample of channel 0.
#[inline]
pub fn bilinear_sample(img: &ImageBuffer, x: f64, y: f64) -> Option<f64> {
    bilinear_sample_channel(img, x, y, 0)
}

#[inline]
pub fn bilinear_sample_channel(img: &ImageBuffer, x: f64, y: f64, c: usize) -> Option<f64> {
    bilinear(img.width(), img.height(), x, y, |ix, iy| Some(img.get(ix, iy, c)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> ImageBuffer {
        ImageBuffer::from_fn_gray(w, h, |_, _| rng.random_range(0.0..1.0))
    }

    #[test]
    fn integer_coordinates_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let img = random_image(&mut rng, 6, 5);
        for y in 0..5 {
            for x in 0..6 {
                assert_eq!(bilinear_sample(&img, x as f64, y as f64), Some(img.get(x, y, 0)));
            }
        }
    }

    #[test]
    fn midpoint_of_zero_and_one() {
        let img = ImageBuffer::new(2, 1, 1, alloc::vec![0.0, 1.0]).unwrap();
        assert_eq!(bilinear_sample(&img, 0.5, 0.0), Some(0.5));
    }

    #[test]
    fn out_of_bounds_is_flagged() {
        let img = ImageBuffer::filled(4, 4, 1, 0.3);
        assert_eq!(bilinear_sample(&img, -0.01, 1.0), None);
        assert_eq!(bilinear_sample(&img, 3.0001, 1.0), None);
        assert_eq!(bilinear_sample(&img, 1.0, f64::NAN), None);
        assert!(bilinear_sample(&img, 3.0, 3.0).is_some());
    }

    #[test]
    fn matches_four_tap_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let img = random_image(&mut rng, 9, 7);
        for _ in 0..500 {
            let x: f64 = rng.random_range(0.0..7.999);
            let y: f64 = rng.random_range(0.0..5.999);
            let (i, j) = (x as usize, y as usize);
            let (a, b) = (x - i as f64, y - j as f64);
            let oracle = (1.0 - a) * (1.0 - b) * img.get(i, j, 0)
                + a * (1.0 - b) * img.get(i + 1, j, 0)
                + (1.0 - a) * b * img.get(i, j + 1, 0)
                + a * b * img.get(i + 1, j + 1, 0);
            assert!((bilinear_sample(&img, x, y).unwrap() - oracle).abs() < 1e-12);
        }
    }
}
