//! Direct photometric refinement of a relative pose: the self-supervised
//! objective from [`warp_loss`](crate::warp_loss) is minimized over a 6-DoF
//! perturbation of an initial pose, coarse to fine over an image pyramid.
//!
//! Gradients are central finite differences. Steps follow a quasi-Newton
//! (BFGS) direction with Armijo backtracking, falling back to steepest
//! descent whenever the quasi-Newton direction is not a descent direction.

use alloc::vec::Vec;

use nalgebra::{Matrix6, Vector3, Vector6};
use thiserror::Error;

use crate::geometry::{CameraIntrinsics, Pose};
use crate::imaging::{gaussian_blur, ImageBuffer};
use crate::warp_loss::{smoothness_loss, BackProjection, DepthMap, FramePair, LossError, LossOptions, LossReport, LossWeights};

const MIN_VALID_DEPTH: f64 = 0.1;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 30;
const STALL_LIMIT: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlignError {
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("only {:.1}% of reference depth is valid (need 10%)", fraction * 100.0)]
    InsufficientValidDepth { fraction: f64 },
    #[error("invalid alignment options: {0}")]
    BadOptions(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    /// Iterations per pyramid level.
    pub max_iterations: usize,
    /// Stop a level once a step moves the parameters less than this.
    pub step_tolerance: f64,
    /// Stop a level after three consecutive steps that improve the loss by
    /// less than this fraction.
    pub loss_tolerance: f64,
    /// Finite-difference step for the rotation axes (radians).
    pub epsilon_rotation: f64,
    /// Finite-difference step for the translation axes (depth units). The
    /// step actually used is never smaller than `epsilon_rotation · ρ` (ρ the
    /// mean depth): tinier steps resolve the kinks of bilinear sampling and
    /// stall the descent.
    pub epsilon_translation: f64,
    pub pyramid_levels: usize,
    pub brightness_alignment: bool,
    pub ssim_window: usize,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            step_tolerance: 1e-6,
            loss_tolerance: 1e-6,
            epsilon_rotation: 1e-4,
            epsilon_translation: 1e-4,
            pyramid_levels: 3,
            brightness_alignment: true,
            ssim_window: 3,
        }
    }
}

impl AlignOptions {
    fn validate(&self) -> Result<(), AlignError> {
        if self.max_iterations == 0 {
            return Err(AlignError::BadOptions("max_iterations must be positive"));
        }
        if !(self.epsilon_rotation > 0.0 && self.epsilon_translation > 0.0) {
            return Err(AlignError::BadOptions("finite-difference epsilons must be positive"));
        }
        if self.pyramid_levels == 0 {
            return Err(AlignError::BadOptions("need at least one pyramid level"));
        }
        if !(self.step_tolerance >= 0.0 && self.loss_tolerance >= 0.0) {
            return Err(AlignError::BadOptions("tolerances must be non-negative"));
        }
        Ok(())
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignStep {
    /// 0 is full resolution.
    pub level: usize,
    pub pose: Pose,
    pub report: LossReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignResult {
    pub pose: Pose,
    /// Starts with the initial pose at every level.
    pub trace: Vec<AlignStep>,
    /// Full-resolution loss at `init` and at `pose`.
    pub initial_loss: f64,
    pub final_loss: f64,
    /// No pose better than `init` was found; `pose` is `init`.
    pub no_descent: bool,
}

struct Level {
    target: ImageBuffer,
    source: ImageBuffer,
    depth: DepthMap,
    intrinsics: CameraIntrinsics,
}

fn half_image(img: &ImageBuffer) -> ImageBuffer {
    // anti-alias before decimation; a bare 2×2 mean lets fine texture fold
    // into spurious minima at the coarse levels
    let img = &gaussian_blur(img, 5, 1.0).expect("valid kernel");
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let (hw, hh) = ((w / 2).max(1), (h / 2).max(1));
    let mut data = Vec::with_capacity(hw * hh * c);
    for y in 0..hh {
        for x in 0..hw {
            for ch in 0..c {
                let mut sum = 0.0;
                let mut n = 0.0;
                for (sx, sy) in [(2 * x, 2 * y), (2 * x + 1, 2 * y), (2 * x, 2 * y + 1), (2 * x + 1, 2 * y + 1)] {
                    if sx < w && sy < h {
                        sum += img.get(sx, sy, ch);
                        n += 1.0;
                    }
                }
                data.push(sum / n);
            }
        }
    }
    ImageBuffer::from_raw(hw, hh, c, data)
}

/// Parameters `x = (ρ·ω, v)` act on the left: `pose(x) = (exp ω, v) ∘ base`.
/// Scaling the rotation by the scene depth `ρ` makes a unit of either block
/// move the image by a similar amount.
fn perturbed(base: &Pose, x: &Vector6<f64>, rho: f64) -> Pose {
    Pose::from_rotation_vector(Vector3::new(x[0], x[1], x[2]) / rho, Vector3::new(x[3], x[4], x[5])).compose(base)
}

struct Objective<'a> {
    level: &'a Level,
    /// Mean valid depth, the rotation scale of the parameters.
    rho: f64,
    smoothness: f64,
    backproj: BackProjection,
    weights: &'a LossWeights,
    opts: LossOptions,
}

impl Objective<'_> {
    fn report(&self, pose: &Pose) -> Result<LossReport, LossError> {
        let pair = FramePair {
            target: &self.level.target,
            source: &self.level.source,
            depth_target: &self.level.depth,
            depth_source: None,
            pose,
            intrinsics: &self.level.intrinsics,
        };
        crate::warp_loss::loss::total_loss_with(&self.backproj, &pair, self.weights, &self.opts, Some(self.smoothness))
    }

    /// Losses of poses that leave no overlap count as infinite.
    fn value(&self, pose: &Pose) -> Result<f64, LossError> {
        match self.report(pose) {
            Ok(r) => Ok(r.total),
            Err(LossError::EmptyMask) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }
}

pub fn refine_pose(
    target: &ImageBuffer,
    source: &ImageBuffer,
    depth_target: &DepthMap,
    intrinsics: &CameraIntrinsics,
    init: &Pose,
    weights: &LossWeights,
    opts: &AlignOptions,
) -> Result<AlignResult, AlignError> {
    opts.validate()?;
    weights.validate()?;
    target.same_shape(source).map_err(LossError::from)?;
    let fraction = depth_target.valid_fraction();
    if fraction < MIN_VALID_DEPTH {
        return Err(AlignError::InsufficientValidDepth { fraction });
    }
    let loss_opts = LossOptions {
        brightness_alignment: opts.brightness_alignment,
        ssim_window: opts.ssim_window,
    };

    let mut levels = Vec::with_capacity(opts.pyramid_levels);
    levels.push(Level {
        target: target.clone(),
        source: source.clone(),
        depth: depth_target.clone(),
        intrinsics: *intrinsics,
    });
    while levels.len() < opts.pyramid_levels {
        let prev = levels.last().expect("non-empty");
        // stop before the SSIM window no longer fits
        if prev.target.width() / 2 < 2 * opts.ssim_window || prev.target.height() / 2 < 2 * opts.ssim_window {
            break;
        }
        let next = Level {
            target: half_image(&prev.target),
            source: half_image(&prev.source),
            depth: prev.depth.half_resolution(),
            intrinsics: prev.intrinsics.half_resolution(),
        };
        levels.push(next);
    }

    let rho = depth_target.mean_valid().unwrap_or(1.0);
    let finest = Objective {
        level: &levels[0],
        rho,
        smoothness: smoothness_loss(&levels[0].target, &levels[0].depth)?,
        backproj: BackProjection::new(&levels[0].depth, &levels[0].intrinsics),
        weights,
        opts: loss_opts,
    };
    let initial_loss = finest.value(init)?;

    let eps = Vector6::new(
        opts.epsilon_rotation * rho,
        opts.epsilon_rotation * rho,
        opts.epsilon_rotation * rho,
        opts.epsilon_translation.max(opts.epsilon_rotation * rho),
        opts.epsilon_translation.max(opts.epsilon_rotation * rho),
        opts.epsilon_translation.max(opts.epsilon_rotation * rho),
    );
    let mut pose = *init;
    let mut trace = Vec::new();
    for (index, level) in levels.iter().enumerate().rev() {
        let obj = if index == 0 {
            None
        } else {
            Some(Objective {
                level,
                rho,
                smoothness: smoothness_loss(&level.target, &level.depth)?,
                backproj: BackProjection::new(&level.depth, &level.intrinsics),
                weights,
                opts: loss_opts,
            })
        };
        let obj = obj.as_ref().unwrap_or(&finest);
        pose = descend(obj, &pose, &eps, opts, index, &mut trace)?;
    }

    let final_loss = finest.value(&pose)?;
    let no_descent = !(final_loss < initial_loss);
    if final_loss > initial_loss || !final_loss.is_finite() {
        // coarse levels can land somewhere the full resolution dislikes
        pose = *init;
    }
    Ok(AlignResult {
        pose,
        trace,
        initial_loss,
        final_loss: final_loss.min(initial_loss),
        no_descent,
    })
}

fn gradient(obj: &Objective<'_>, base: &Pose, eps: &Vector6<f64>) -> Result<Vector6<f64>, LossError> {
    let mut g = Vector6::zeros();
    for i in 0..6 {
        let mut d = Vector6::zeros();
        d[i] = eps[i];
        let fp = obj.value(&perturbed(base, &d, obj.rho))?;
        let fm = obj.value(&perturbed(base, &-d, obj.rho))?;
        g[i] = if fp.is_finite() && fm.is_finite() {
            (fp - fm) / (2.0 * eps[i])
        } else {
            0.0
        };
    }
    Ok(g)
}

/// Quasi-Newton descent at one level. Parameters are re-centred on the
/// current pose after every step; the BFGS inverse-Hessian estimate is kept
/// across steps (the chart change is second order in the step).
fn descend(
    obj: &Objective<'_>,
    start: &Pose,
    eps: &Vector6<f64>,
    opts: &AlignOptions,
    level: usize,
    trace: &mut Vec<AlignStep>,
) -> Result<Pose, LossError> {
    let mut pose = *start;
    let report = match obj.report(&pose) {
        Ok(r) => r,
        Err(LossError::EmptyMask) => return Ok(pose),
        Err(e) => return Err(e),
    };
    let mut f = report.total;
    trace.push(AlignStep { level, pose, report });
    let mut hinv = Matrix6::identity();
    // first trial step moves the image by about one pixel
    let first_len = obj.rho / obj.level.intrinsics.fx.max(obj.level.intrinsics.fy);
    let mut g = gradient(obj, &pose, eps)?;
    let mut first = true;
    let mut restarted = false;
    let mut stalls = 0;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        if g.norm() == 0.0 {
            break;
        }
        let mut dir = -(hinv * g);
        if dir.dot(&g) >= 0.0 {
            hinv = Matrix6::identity();
            dir = -g;
        }
        if first {
            dir *= first_len / dir.norm();
            first = false;
        }
        let slope = dir.dot(&g);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let cand = perturbed(&pose, &(dir * t), obj.rho);
            let fc = obj.value(&cand)?;
            if fc.is_finite() && fc <= f + ARMIJO * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, fc)) = accepted else {
            // a stale curvature estimate can point nowhere useful: retry once
            // from steepest descent before giving up on this level
            if restarted {
                break;
            }
            restarted = true;
            hinv = Matrix6::identity();
            first = true;
            continue;
        };
        restarted = false;
        iterations += 1;
        let step = dir * t;
        let g_new = gradient(obj, &cand, eps)?;
        let y = g_new - g;
        let sy = step.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let i = Matrix6::identity();
            hinv = (i - step * y.transpose() * rho) * hinv * (i - y * step.transpose() * rho)
                + step * step.transpose() * rho;
        }
        let improvement = f - fc;
        pose = cand;
        f = fc;
        g = g_new;
        let report = obj.report(&pose)?;
        trace.push(AlignStep { level, pose, report });
        if step.norm() < opts.step_tolerance {
            break;
        }
        // narrow valleys produce the odd tiny step; stop only on a run of them
        stalls = if improvement < opts.loss_tolerance * f.abs() { stalls + 1 } else { 0 };
        if stalls == STALL_LIMIT {
            break;
        }
    }
    Ok(pose)
}
