use alloc::vec::Vec;

use nalgebra::Vector3;

use super::TrajError;
use crate::geometry::Pose;

/// Half the gap between consecutive frames at 20 fps, in seconds.
pub const DEFAULT_MAX_DT: f64 = 0.02;

/// Timestamped poses with strictly increasing timestamps (seconds).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    stamps: Vec<f64>,
    poses: Vec<Pose>,
}

impl Trajectory {
    pub fn new(stamps: Vec<f64>, poses: Vec<Pose>) -> Result<Self, TrajError> {
        if stamps.len() != poses.len() {
            return Err(TrajError::LengthMismatch(stamps.len(), poses.len()));
        }
        if stamps.is_empty() {
            return Err(TrajError::Empty);
        }
        for (i, t) in stamps.iter().enumerate() {
            if !t.is_finite() || (i > 0 && *t <= stamps[i - 1]) {
                return Err(TrajError::NonIncreasingTimestamps(i));
            }
        }
        Ok(Self { stamps, poses })
    }

    /// Poses sampled every `dt` seconds starting at 0.
    pub fn uniform(dt: f64, poses: Vec<Pose>) -> Result<Self, TrajError> {
        let stamps = (0..poses.len()).map(|i| i as f64 * dt).collect();
        Self::new(stamps, poses)
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.stamps
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.poses.iter().map(|p| *p.translation()).collect()
    }

    /// Keeps every `step`-th sample, starting with the first.
    pub fn decimate(&self, step: usize) -> Self {
        let step = step.max(1);
        Self {
            stamps: self.stamps.iter().step_by(step).copied().collect(),
            poses: self.poses.iter().step_by(step).copied().collect(),
        }
    }

    /// The same trajectory with `f` applied to every pose.
    pub fn map_poses(&self, f: impl FnMut(&Pose) -> Pose) -> Self {
        Self {
            stamps: self.stamps.clone(),
            poses: self.poses.iter().map(f).collect(),
        }
    }
}

/// One-to-one timestamp matching.
///
/// All `(gt, est)` pairs with `|dt| ≤ max_dt` are ranked by `|dt|` (ties by gt
/// index, then est index) and accepted greedily when neither side is taken.
/// The result is sorted by ground-truth index.
pub fn associate(gt: &Trajectory, est: &Trajectory, max_dt: f64) -> Result<Vec<(usize, usize)>, TrajError> {
    let mut candidates = Vec::new();
    let es = est.timestamps();
    for (i, t) in gt.timestamps().iter().enumerate() {
        let lo = es.partition_point(|s| *s < t - max_dt);
        for (j, s) in es.iter().enumerate().skip(lo) {
            let dt = (s - t).abs();
            if *s > t + max_dt {
                break;
            }
            if dt <= max_dt {
                candidates.push((dt, i, j));
            }
        }
    }
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gt_used = alloc::vec![false; gt.len()];
    let mut est_used = alloc::vec![false; est.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !gt_used[i] && !est_used[j] {
            gt_used[i] = true;
            est_used[j] = true;
            pairs.push((i, j));
        }
    }
    if pairs.is_empty() {
        return Err(TrajError::NoMatches);
    }
    pairs.sort_unstable();
    Ok(pairs)
}
