use super::{ImageBuffer, ImagingError};

pub type Histogram = [u64; 256];

/// Otsu's threshold on a 256-bin histogram of a grayscale image.
///
/// Sample `v` falls in bin `round(255·v)`. The returned threshold sits halfway
/// between the last bin of the lower class and the next bin, so pixels with
/// `v > threshold` form the upper class. Ties go to the lowest bin.
pub fn otsu_threshold(img: &ImageBuffer) -> Result<f64, ImagingError> {
    img.require_gray()?;
    let mut hist: Histogram = [0; 256];
    for v in img.data() {
        hist[bin_of(*v)] += 1;
    }
    match otsu_bin(&hist) {
        Some(t) => Ok((t as f64 + 0.5) / 255.0),
        None => Err(ImagingError::DegenerateHistogram { value: img.data()[0] }),
    }
}

#[inline]
pub(crate) fn bin_of(v: f64) -> usize {
    let b = (v * 255.0 + 0.5) as usize;
    b.min(255)
}

/// Highest-variance split bin, or `None` when fewer than two bins are occupied.
pub fn otsu_bin(hist: &Histogram) -> Option<usize> {
    let occupied = hist.iter().filter(|c| **c > 0).count();
    if occupied < 2 {
        return None;
    }
    let total: u64 = hist.iter().sum();
    let total_sum: u64 = hist.iter().enumerate().map(|(i, c)| i as u64 * c).sum();
    let (mut n0, mut s0) = (0u64, 0u64);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (t, count) in hist.iter().enumerate().take(255) {
        n0 += count;
        s0 += t as u64 * count;
        let n1 = total - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let var = between_class_variance(n0, s0, n1, total_sum - s0);
        if var > best.0 {
            best = (var, t);
        }
    }
    Some(best.1)
}

/// Between-class variance up to the constant factor `1/N²`:
/// `(n1·s0 − n0·s1)² / (n0·n1)`, with the difference taken exactly.
pub(crate) fn between_class_variance(n0: u64, s0: u64, n1: u64, s1: u64) -> f64 {
    let diff = n1 as i128 * s0 as i128 - n0 as i128 * s1 as i128;
    let d = diff as f64;
    d * d / (n0 as f64 * n1 as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive oracle: recount both classes from scratch for every split.
    fn oracle(hist: &Histogram) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for t in 0..255 {
            let (mut n0, mut s0, mut n1, mut s1) = (0u64, 0u64, 0u64, 0u64);
            for (i, c) in hist.iter().enumerate() {
                if i <= t {
                    n0 += c;
                    s0 += i as u64 * c;
                } else {
                    n1 += c;
                    s1 += i as u64 * c;
                }
            }
            if n0 == 0 || n1 == 0 {
                continue;
            }
            let v = between_class_variance(n0, s0, n1, s1);
            if v > best.0 {
                best = (v, t);
            }
        }
        best.1
    }

    #[test]
    fn two_level_image() {
        let img = ImageBuffer::from_fn_gray(10, 10, |x, _| if x < 5 { 0.2 } else { 0.8 });
        let t = otsu_threshold(&img).unwrap();
        assert!(t > 0.2 && t < 0.8, "{t}");
    }

    #[test]
    fn constant_image_is_degenerate() {
        let img = ImageBuffer::filled(4, 4, 1, 0.37);
        assert_eq!(otsu_threshold(&img), Err(ImagingError::DegenerateHistogram { value: 0.37 }));
    }

    #[test]
    fn bimodal_mixture_matches_exhaustive_search() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let img = ImageBuffer::from_fn_gray(64, 48, |_, _| {
                let (mu, sd) = if rng.random_bool(0.35) { (0.72, 0.06) } else { (0.3, 0.09) };
                // Box-Muller
                let u1: f64 = rng.random_range(1e-12..1.0);
                let u2: f64 = rng.random_range(0.0..1.0);
                mu + sd * (-2.0 * u1.ln()).sqrt() * (2.0 * core::f64::consts::PI * u2).cos()
            });
            let mut hist = [0u64; 256];
            for v in img.data() {
                hist[bin_of(*v)] += 1;
            }
            assert_eq!(otsu_bin(&hist), Some(oracle(&hist)));
        }
    }

    #[test]
    fn ties_prefer_lowest_bin() {
        let mut hist = [0u64; 256];
        hist[10] = 5;
        hist[200] = 5;
        assert_eq!(otsu_bin(&hist), Some(10));
    }
}
