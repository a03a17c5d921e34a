use super::{check_dims, ImageBuffer, ImagingError, Mask};

pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Mean SSIM over every `window x window` box that fits inside the image.
///
/// Box statistics are uniform-weighted with population (co)variances.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer, window: usize) -> Result<f64, ImagingError> {
    a.same_shape(b)?;
    a.require_gray()?;
    check_window(window)?;
    let (w, h) = (a.width(), a.height());
    if w < window || h < window {
        return Err(ImagingError::ImageTooSmall(window));
    }
    let r = window / 2;
    let mut total = 0.0;
    let mut count = 0usize;
    for cy in r..h - r {
        for cx in r..w - r {
            let stats = window_stats(a, b, cx, cy, r);
            total += stats.ssim();
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// Mean SSIM over the masked pixels of channel `c`.
///
/// Every masked pixel is a window center; the window is clipped to the image
/// and only masked pixels inside it contribute to the local statistics. With a
/// full mask and an interior center this is the ordinary windowed SSIM.
pub fn ssim_masked(
    a: &ImageBuffer,
    b: &ImageBuffer,
    window: usize,
    mask: &Mask,
    c: usize,
) -> Result<f64, ImagingError> {
    a.same_shape(b)?;
    check_dims((a.width(), a.height()), (mask.width(), mask.height()))?;
    check_window(window)?;
    let (w, h) = (a.width(), a.height());
    let r = window / 2;
    // masked moments, box-summed along rows and then along columns
    const K: usize = 6;
    let mut moments = alloc::vec![[0.0f64; K]; w * h];
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                let (va, vb) = (a.get(x, y, c), b.get(x, y, c));
                moments[y * w + x] = [1.0, va, vb, va * va, vb * vb, va * vb];
            }
        }
    }
    let box_sum = |src: &[[f64; K]], stride: usize, len: usize, outer: usize, outer_stride: usize| {
        let mut out = alloc::vec![[0.0f64; K]; w * h];
        for o in 0..outer {
            let base = o * outer_stride;
            for i in 0..len {
                let mut acc = [0.0; K];
                for j in i.saturating_sub(r)..=(i + r).min(len - 1) {
                    let m = &src[base + j * stride];
                    for k in 0..K {
                        acc[k] += m[k];
                    }
                }
                out[base + i * stride] = acc;
            }
        }
        out
    };
    let rows = box_sum(&moments, 1, w, h, w);
    let boxes = box_sum(&rows, w, h, w, 1);
    let mut total = 0.0;
    let mut count = 0usize;
    for (i, s) in boxes.iter().enumerate() {
        if !mask.get(i % w, i / w) {
            continue;
        }
        let n = s[0];
        let (mu_a, mu_b) = (s[1] / n, s[2] / n);
        let stats = WindowStats {
            mu_a,
            mu_b,
            var_a: ((s[3] - s[1] * mu_a) / n).max(0.0),
            var_b: ((s[4] - s[2] * mu_b) / n).max(0.0),
            cov: (s[5] - s[1] * mu_b) / n,
        };
        total += stats.ssim();
        count += 1;
    }
    if count == 0 {
        return Err(ImagingError::EmptyMask);
    }
    Ok(total / count as f64)
}

fn check_window(window: usize) -> Result<(), ImagingError> {
    if window == 0 || window % 2 == 0 {
        return Err(ImagingError::BadKernel {
            size: window,
            sigma: 1.0,
        });
    }
    Ok(())
}

struct WindowStats {
    mu_a: f64,
    mu_b: f64,
    var_a: f64,
    var_b: f64,
    cov: f64,
}

impl WindowStats {
    fn ssim(&self) -> f64 {
        let num = (2.0 * self.mu_a * self.mu_b + SSIM_C1) * (2.0 * self.cov + SSIM_C2);
        let den = (self.mu_a * self.mu_a + self.mu_b * self.mu_b + SSIM_C1) * (self.var_a + self.var_b + SSIM_C2);
        num / den
    }
}

fn window_stats(a: &ImageBuffer, b: &ImageBuffer, cx: usize, cy: usize, r: usize) -> WindowStats {
    let (mut n, mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for y in cy - r..=cy + r {
        for x in cx - r..=cx + r {
            let (va, vb) = (a.get(x, y, 0), b.get(x, y, 0));
            n += 1.0;
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
        }
    }
    let (mu_a, mu_b) = (sa / n, sb / n);
    // single pass; clamp the round-off that can push a zero variance negative
    WindowStats {
        mu_a,
        mu_b,
        var_a: ((saa - sa * mu_a) / n).max(0.0),
        var_b: ((sbb - sb * mu_b) / n).max(0.0),
        cov: (sab - sa * mu_b) / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use alloc::vec::Vec;

    #[test]
    fn identical_images_score_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let img = ImageBuffer::from_fn_gray(12, 10, |_, _| rng.random_range(0.0..1.0));
        assert_eq!(ssim(&img, &img, 3).unwrap(), 1.0);
    }

    #[test]
    fn symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = ImageBuffer::from_fn_gray(12, 10, |_, _| rng.random_range(0.0..1.0));
        let b = ImageBuffer::from_fn_gray(12, 10, |_, _| rng.random_range(0.0..1.0));
        let d = ssim(&a, &b, 3).unwrap() - ssim(&b, &a, 3).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn inverted_binary_image_is_negative() {
        let a = ImageBuffer::from_fn_gray(8, 8, |x, y| ((x + 2 * y) % 3 == 0) as u8 as f64);
        let b = a.map(|v| 1.0 - v);
        // direct windowed recomputation
        let mut total = 0.0;
        let mut n = 0.0;
        for cy in 1..7 {
            for cx in 1..7 {
                let px: std::vec::Vec<(f64, f64)> = (cy - 1..=cy + 1)
                    .flat_map(|y| (cx - 1..=cx + 1).map(move |x| (x, y)))
                    .map(|(x, y)| (a.get(x, y, 0), b.get(x, y, 0)))
                    .collect();
                let ma = px.iter().map(|p| p.0).sum::<f64>() / 9.0;
                let mb = px.iter().map(|p| p.1).sum::<f64>() / 9.0;
                let va = px.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>() / 9.0;
                let vb = px.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>() / 9.0;
                let cv = px.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / 9.0;
                total += ((2.0 * ma * mb + SSIM_C1) * (2.0 * cv + SSIM_C2))
                    / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
                n += 1.0;
            }
        }
        let s = ssim(&a, &b, 3).unwrap();
        assert!((s - total / n).abs() < 1e-12);
        assert!(s < 0.0);
    }

    #[test]
    fn constant_images_use_luminance_term() {
        let a = ImageBuffer::filled(6, 6, 1, 0.2);
        let b = ImageBuffer::filled(6, 6, 1, 0.7);
        let expected = (2.0 * 0.2 * 0.7 + SSIM_C1) / (0.2 * 0.2 + 0.7 * 0.7 + SSIM_C1);
        assert!((ssim(&a, &b, 3).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let a = ImageBuffer::filled(6, 6, 1, 0.2);
        let b = ImageBuffer::filled(5, 6, 1, 0.2);
        assert!(matches!(ssim(&a, &b, 3), Err(ImagingError::DimensionMismatch(..))));
        assert!(matches!(ssim(&a, &a, 7), Err(ImagingError::ImageTooSmall(7))));
        let empty = Mask::filled(6, 6, false);
        assert_eq!(ssim_masked(&a, &a, 3, &empty, 0), Err(ImagingError::EmptyMask));
    }

    #[test]
    fn full_mask_interior_matches_plain() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = ImageBuffer::from_fn_gray(9, 9, |_, _| rng.random_range(0.0..1.0));
        let b = ImageBuffer::from_fn_gray(9, 9, |_, _| rng.random_range(0.0..1.0));
        let interior = Mask::from_fn(9, 9, |x, y| (1..8).contains(&x) && (1..8).contains(&y));
        let mut total = 0.0;
        for cy in 1..8 {
            for cx in 1..8 {
                total += window_stats(&a, &b, cx, cy, 1).ssim();
            }
        }
        assert!((ssim(&a, &b, 3).unwrap() - total / 49.0).abs() < 1e-12);
        assert!(ssim_masked(&a, &b, 3, &interior, 0).is_ok());
    }

    /// Two-pass statistics over the clipped window, masked pixels only.
    fn masked_oracle(a: &ImageBuffer, b: &ImageBuffer, window: usize, mask: &Mask) -> f64 {
        let r = window as isize / 2;
        let (w, h) = (a.width() as isize, a.height() as isize);
        let (mut total, mut count) = (0.0, 0.0);
        for cy in 0..h {
            for cx in 0..w {
                if !mask.get(cx as usize, cy as usize) {
                    continue;
                }
                let mut px = Vec::new();
                for y in (cy - r).max(0)..=(cy + r).min(h - 1) {
                    for x in (cx - r).max(0)..=(cx + r).min(w - 1) {
                        if mask.get(x as usize, y as usize) {
                            px.push((a.get(x as usize, y as usize, 0), b.get(x as usize, y as usize, 0)));
                        }
                    }
                }
                let n = px.len() as f64;
                let ma = px.iter().map(|p| p.0).sum::<f64>() / n;
                let mb = px.iter().map(|p| p.1).sum::<f64>() / n;
                let va = px.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>() / n;
                let vb = px.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>() / n;
                let cov = px.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / n;
                total += (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2)
                    / ((ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2));
                count += 1.0;
            }
        }
        total / count
    }

    #[test]
    fn masked_matches_two_pass_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for window in [1, 3, 5] {
            let a = ImageBuffer::from_fn_gray(11, 8, |_, _| rng.random_range(0.0..1.0));
            let b = ImageBuffer::from_fn_gray(11, 8, |_, _| rng.random_range(0.0..1.0));
            let mask = Mask::from_fn(11, 8, |_, _| rng.random_bool(0.7));
            let got = ssim_masked(&a, &b, window, &mask, 0).unwrap();
            assert!((got - masked_oracle(&a, &b, window, &mask)).abs() < 1e-12);
        }
    }
}
