#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::{BackProjection, DepthMap, LossError, ValidMask};
use crate::geometry::{CameraIntrinsics, Pose};
use crate::imaging::{check_dims, clamp_unit, ssim_masked, ImageBuffer, Raster};

/// Affine intensity map `x ↦ a·x + c` applied to the synthesized frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrightnessParams {
    pub a: f64,
    pub c: f64,
}

impl BrightnessParams {
    pub const IDENTITY: Self = Self { a: 1.0, c: 0.0 };

    pub fn new(a: f64, c: f64) -> Result<Self, LossError> {
        if !(a > 0.0) || !a.is_finite() || !c.is_finite() {
            return Err(LossError::NonPositiveGain(a));
        }
        Ok(Self { a, c })
    }

    /// Transformed intensity, clamped to `[0, 1]`.
    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        clamp_unit(self.a * v + self.c)
    }

    pub fn apply_image(&self, img: &ImageBuffer) -> ImageBuffer {
        img.map(|v| self.apply(v))
    }
}

impl Default for BrightnessParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda_p: f64,
    pub lambda_s: f64,
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        let all = [self.alpha, self.beta, self.gamma, self.lambda_p, self.lambda_s];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(LossError::InvalidWeights)
        }
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.1,
            gamma: 0.5,
            lambda_p: 0.15,
            lambda_s: 0.85,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossOptions {
    /// Fit `T_b` per pair; when off the identity map is used.
    pub brightness_alignment: bool,
    /// Odd SSIM window size.
    pub ssim_window: usize,
}

impl Default for LossOptions {
    fn default() -> Self {
        Self {
            brightness_alignment: true,
            ssim_window: 3,
        }
    }
}

/// Closed-form least squares `argmin Σ (a·synth + c − target)²` over the mask,
/// pooling all channels.
///
/// Constant synthesized intensities (or a non-positive optimal gain) yield
/// [`LossError::DegenerateIntensities`] carrying the fallback `a = 1`,
/// `c = mean(target − synth)`.
pub fn estimate_brightness(synth: &ImageBuffer, target: &ImageBuffer, mask: &ValidMask) -> Result<BrightnessParams, LossError> {
    synth.same_shape(target)?;
    check_dims((synth.width(), synth.height()), (mask.width(), mask.height()))?;
    let ch = synth.channels();
    let (mut n, mut ss, mut st) = (0usize, 0.0, 0.0);
    for (i, _) in mask.data().iter().enumerate().filter(|(_, m)| **m) {
        for c in 0..ch {
            ss += synth.data()[i * ch + c];
            st += target.data()[i * ch + c];
            n += 1;
        }
    }
    if n == 0 {
        return Err(LossError::EmptyMask);
    }
    let nf = n as f64;
    let (ms, mt) = (ss / nf, st / nf);
    let (mut var, mut cov) = (0.0, 0.0);
    for (i, _) in mask.data().iter().enumerate().filter(|(_, m)| **m) {
        for c in 0..ch {
            let ds = synth.data()[i * ch + c] - ms;
            var += ds * ds;
            cov += ds * (target.data()[i * ch + c] - mt);
        }
    }
    let fallback = BrightnessParams { a: 1.0, c: mt - ms };
    if var <= 1e-12 * nf {
        return Err(LossError::DegenerateIntensities { fallback });
    }
    let a = cov / var;
    if !(a > 0.0) {
        return Err(LossError::DegenerateIntensities { fallback });
    }
    Ok(BrightnessParams { a, c: mt - a * ms })
}

/// Per-pixel pieces of the photometric term.
#[derive(Debug, Clone)]
pub struct PhotometricMap {
    /// `‖T_b(synth)(p) − target(p)‖₂` over channels; zero outside the mask.
    pub l2: Raster,
    /// Channel-averaged SSIM between `T_b(synth)` and `target` over the mask.
    pub ssim: f64,
    pub mask: ValidMask,
}

impl PhotometricMap {
    /// `λ_p·l2(p) + λ_s·(1 − SSIM)/2` at a masked pixel.
    #[inline]
    pub fn pixel_loss(&self, x: usize, y: usize, lambda_p: f64, lambda_s: f64) -> f64 {
        lambda_p * self.l2.get(x, y) + lambda_s * (1.0 - self.ssim) * 0.5
    }

    /// Mean over the mask of `weight(p)·pixel_loss(p)`.
    pub fn weighted_mean(&self, lambda_p: f64, lambda_s: f64, weight: impl Fn(usize, usize) -> f64) -> f64 {
        let mut sum = 0.0;
        for y in 0..self.l2.height() {
            for x in 0..self.l2.width() {
                if self.mask.get(x, y) {
                    sum += weight(x, y) * self.pixel_loss(x, y, lambda_p, lambda_s);
                }
            }
        }
        sum / self.mask.count() as f64
    }

    pub fn mean_l2(&self) -> f64 {
        self.weighted_mean(1.0, 0.0, |_, _| 1.0)
    }
}

pub fn photometric_map(
    synth: &ImageBuffer,
    target: &ImageBuffer,
    mask: &ValidMask,
    bp: &BrightnessParams,
    ssim_window: usize,
) -> Result<PhotometricMap, LossError> {
    synth.same_shape(target)?;
    check_dims((synth.width(), synth.height()), (mask.width(), mask.height()))?;
    if mask.is_empty() {
        return Err(LossError::EmptyMask);
    }
    let aligned = bp.apply_image(synth);
    let ch = synth.channels();
    let l2 = Raster::from_fn(synth.width(), synth.height(), |x, y| {
        if !mask.get(x, y) {
            return 0.0;
        }
        let mut acc = 0.0;
        for c in 0..ch {
            let d = aligned.get(x, y, c) - target.get(x, y, c);
            acc += d * d;
        }
        acc.sqrt()
    });
    let mut ssim = 0.0;
    for c in 0..ch {
        ssim += ssim_masked(&aligned, target, ssim_window, mask, c)?;
    }
    Ok(PhotometricMap {
        l2,
        ssim: ssim / ch as f64,
        mask: mask.clone(),
    })
}

/// Mean over the mask of `λ_p·‖T_b(synth) − target‖₂ + λ_s·(1 − SSIM)/2`, with a
/// 3×3 SSIM window.
pub fn photometric_loss(
    synth: &ImageBuffer,
    target: &ImageBuffer,
    mask: &ValidMask,
    bp: &BrightnessParams,
    lambda_p: f64,
    lambda_s: f64,
) -> Result<f64, LossError> {
    let map = photometric_map(synth, target, mask, bp, 3)?;
    Ok(map.weighted_mean(lambda_p, lambda_s, |_, _| 1.0))
}

/// `Σ_p (e^{−|∂I|}·∂D̄)²` over x and y forward differences, where `D̄` is depth
/// divided by its mean over valid pixels and `|∂I|` is the channel-averaged
/// absolute intensity difference along the same axis. A difference contributes
/// only when both depth samples are valid.
pub fn smoothness_loss(img: &ImageBuffer, depth: &DepthMap) -> Result<f64, LossError> {
    check_dims((img.width(), img.height()), (depth.width(), depth.height()))?;
    let Some(mean) = depth.mean_valid() else {
        return Ok(0.0);
    };
    let (w, h, ch) = (img.width(), img.height(), img.channels());
    let edge = |x0: usize, y0: usize, x1: usize, y1: usize| -> f64 {
        let mut g = 0.0;
        for c in 0..ch {
            g += (img.get(x1, y1, c) - img.get(x0, y0, c)).abs();
        }
        (-(g / ch as f64)).exp()
    };
    let mut total = 0.0;
    for y in 0..h {
        for x in 0..w {
            let Some(d) = depth.get(x, y) else { continue };
            if x + 1 < w {
                if let Some(dn) = depth.get(x + 1, y) {
                    let t = edge(x, y, x + 1, y) * (dn - d) / mean;
                    total += t * t;
                }
            }
            if y + 1 < h {
                if let Some(dn) = depth.get(x, y + 1) {
                    let t = edge(x, y, x, y + 1) * (dn - d) / mean;
                    total += t * t;
                }
            }
        }
    }
    Ok(total)
}

/// `|d_warped − d_interp| / (d_warped + d_interp)`; lies in `[0, 1)` for
/// positive inputs.
#[inline]
pub fn depth_difference(d_warped: f64, d_interp: f64) -> f64 {
    (d_warped - d_interp).abs() / (d_warped + d_interp)
}

/// Mean of `d_diff` over the mask.
pub fn geometry_consistency_loss(d_diff: &Raster, mask: &ValidMask) -> Result<f64, LossError> {
    check_dims((d_diff.width(), d_diff.height()), (mask.width(), mask.height()))?;
    let n = mask.count();
    if n == 0 {
        return Err(LossError::EmptyMask);
    }
    let sum: f64 = d_diff
        .data()
        .iter()
        .zip(mask.data())
        .filter(|(_, m)| **m)
        .map(|(d, _)| *d)
        .sum();
    Ok(sum / n as f64)
}

/// Inputs for one (target, source) training pair. `pose` maps target-frame
/// points into the source frame.
#[derive(Debug, Clone, Copy)]
pub struct FramePair<'a> {
    pub target: &'a ImageBuffer,
    pub source: &'a ImageBuffer,
    pub depth_target: &'a DepthMap,
    /// Without source depth the geometry term is zero and `M ≡ 1`.
    pub depth_source: Option<&'a DepthMap>,
    pub pose: &'a Pose,
    pub intrinsics: &'a CameraIntrinsics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub total: f64,
    /// Mask-weighted photometric term (`M = 1 − D_diff`).
    pub photometric_masked: f64,
    /// Unweighted photometric term.
    pub photometric: f64,
    /// Mean `‖T_b(synth) − target‖₂` over valid pixels, without `λ_p`.
    pub l2: f64,
    pub ssim: f64,
    pub smoothness: f64,
    pub geometry: f64,
    pub brightness: BrightnessParams,
    /// Brightness fit fell back to `a = 1`.
    pub brightness_degenerate: bool,
    pub valid_pixels: usize,
    pub consistency_pixels: usize,
}

pub fn total_loss(pair: &FramePair<'_>, weights: &LossWeights, opts: &LossOptions) -> Result<LossReport, LossError> {
    let bp = BackProjection::new(pair.depth_target, pair.intrinsics);
    total_loss_with(&bp, pair, weights, opts, None)
}

/// [`total_loss`] with a precomputed back-projection of `pair.depth_target`
/// and, optionally, its smoothness term (which does not depend on the pose).
pub(crate) fn total_loss_with(
    backproj: &BackProjection,
    pair: &FramePair<'_>,
    weights: &LossWeights,
    opts: &LossOptions,
    smoothness: Option<f64>,
) -> Result<LossReport, LossError> {
    weights.validate()?;
    pair.target.same_shape(pair.source)?;
    check_dims(
        (pair.target.width(), pair.target.height()),
        (pair.depth_target.width(), pair.depth_target.height()),
    )?;
    let (synth, mask) = backproj.warp(pair.source, pair.pose, pair.intrinsics)?;
    if mask.is_empty() {
        return Err(LossError::EmptyMask);
    }

    let (brightness, brightness_degenerate) = if opts.brightness_alignment {
        match estimate_brightness(&synth, pair.target, &mask) {
            Ok(bp) => (bp, false),
            Err(LossError::DegenerateIntensities { fallback }) => (fallback, true),
            Err(e) => return Err(e),
        }
    } else {
        (BrightnessParams::IDENTITY, false)
    };

    let (d_diff, consistency_pixels, geometry) = match pair.depth_source {
        Some(ds) => {
            let (diff, dmask) = backproj.depth_consistency(ds, pair.pose, pair.intrinsics)?;
            let gc = geometry_consistency_loss(&diff, &dmask)?;
            (Some((diff, dmask.clone())), dmask.count(), gc)
        }
        None => (None, 0, 0.0),
    };

    let map = photometric_map(&synth, pair.target, &mask, &brightness, opts.ssim_window)?;
    let (lp, ls) = (weights.lambda_p, weights.lambda_s);
    let photometric = map.weighted_mean(lp, ls, |_, _| 1.0);
    let photometric_masked = match &d_diff {
        Some((diff, dmask)) => map.weighted_mean(lp, ls, |x, y| if dmask.get(x, y) { 1.0 - diff.get(x, y) } else { 1.0 }),
        None => photometric,
    };
    let smoothness = match smoothness {
        Some(s) => s,
        None => smoothness_loss(pair.target, pair.depth_target)?,
    };
    let total = weights.alpha * photometric_masked + weights.beta * smoothness + weights.gamma * geometry;
    Ok(LossReport {
        total,
        photometric_masked,
        photometric,
        l2: map.mean_l2(),
        ssim: map.ssim,
        smoothness,
        geometry,
        brightness,
        brightness_degenerate,
        valid_pixels: mask.count(),
        consistency_pixels,
    })
}
