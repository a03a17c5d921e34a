use alloc::vec::Vec;

use nalgebra::Vector3;

use super::{associate, AlignmentTransform, TrajError, Trajectory};
use crate::geometry::{fit_rigid, Pose};
use crate::stats::MetricStats;

/// Least-squares transform `S` minimizing `Σ‖q_i − S·p_i‖²` over the
/// positions of paired poses (estimate `p_i` onto ground truth `q_i`).
pub fn horn_align(gt: &[Pose], est: &[Pose], with_scale: bool) -> Result<AlignmentTransform, TrajError> {
    let src: Vec<Vector3<f64>> = est.iter().map(|p| *p.translation()).collect();
    let dst: Vec<Vector3<f64>> = gt.iter().map(|p| *p.translation()).collect();
    Ok(fit_rigid(&src, &dst, with_scale)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AteResult {
    pub alignment: AlignmentTransform,
    /// Per-pair translational error, in the ground-truth units.
    pub errors: Vec<f64>,
    pub stats: MetricStats,
}

/// Absolute trajectory error `‖trans(Q_i⁻¹·S·P_i)‖` after Horn alignment.
pub fn ate(gt: &[Pose], est: &[Pose], with_scale: bool) -> Result<AteResult, TrajError> {
    let alignment = horn_align(gt, est, with_scale)?;
    let errors: Vec<f64> = gt
        .iter()
        .zip(est)
        .map(|(q, p)| (alignment.apply(p.translation()) - q.translation()).norm())
        .collect();
    let stats = MetricStats::from_samples(&errors).ok_or(TrajError::Empty)?;
    Ok(AteResult {
        alignment,
        errors,
        stats,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RpeResult {
    pub delta: usize,
    pub trans_errors: Vec<f64>,
    /// Radians.
    pub rot_errors: Vec<f64>,
    pub trans: MetricStats,
    /// Radians.
    pub rot: MetricStats,
}

/// Relative pose error over a gap of `delta` samples:
/// `E_i = (Q_i⁻¹·Q_{i+Δ})⁻¹·(P_i⁻¹·P_{i+Δ})`, reported as `‖trans(E_i)‖` and the
/// rotation angle of `E_i`.
pub fn rpe(gt: &[Pose], est: &[Pose], delta: usize) -> Result<RpeResult, TrajError> {
    if gt.len() != est.len() {
        return Err(TrajError::LengthMismatch(gt.len(), est.len()));
    }
    if delta == 0 || gt.len() <= delta {
        return Err(TrajError::TrajectoryTooShort { len: gt.len(), delta });
    }
    let n = gt.len() - delta;
    let mut trans_errors = Vec::with_capacity(n);
    let mut rot_errors = Vec::with_capacity(n);
    for i in 0..n {
        let dq = gt[i].inverse().compose(&gt[i + delta]);
        let dp = est[i].inverse().compose(&est[i + delta]);
        let e = dq.inverse().compose(&dp);
        trans_errors.push(e.translation().norm());
        rot_errors.push(e.rotation_angle());
    }
    let trans = MetricStats::from_samples(&trans_errors).ok_or(TrajError::Empty)?;
    let rot = MetricStats::from_samples(&rot_errors).ok_or(TrajError::Empty)?;
    Ok(RpeResult {
        delta,
        trans_errors,
        rot_errors,
        trans,
        rot,
    })
}

/// Association followed by ATE and RPE on the matched pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub pairs: Vec<(usize, usize)>,
    pub ate: AteResult,
    pub rpe: RpeResult,
}

pub fn evaluate(gt: &Trajectory, est: &Trajectory, max_dt: f64, with_scale: bool, delta: usize) -> Result<Evaluation, TrajError> {
    let pairs = associate(gt, est, max_dt)?;
    let q: Vec<Pose> = pairs.iter().map(|(i, _)| gt.poses()[*i]).collect();
    let p: Vec<Pose> = pairs.iter().map(|(_, j)| est.poses()[*j]).collect();
    let ate = ate(&q, &p, with_scale)?;
    let rpe = rpe(&q, &p, delta)?;
    Ok(Evaluation { pairs, ate, rpe })
}
