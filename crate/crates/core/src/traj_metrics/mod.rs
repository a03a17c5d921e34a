//! Trajectory evaluation: timestamp association, Horn alignment, absolute
//! trajectory error and relative pose error.
//!
//! Ground truth poses are written `Q_i`, estimates `P_i`. All poses map
//! camera coordinates to world coordinates.

mod metrics;
mod trajectory;

pub use metrics::{ate, evaluate, horn_align, rpe, AteResult, Evaluation, RpeResult};
pub use trajectory::{associate, Trajectory, DEFAULT_MAX_DT};

use thiserror::Error;

use crate::geometry::GeometryError;

/// Best-fit transform applied to the estimate.
pub type AlignmentTransform = crate::geometry::Similarity;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajError {
    #[error("trajectory is empty")]
    Empty,
    #[error("timestamps must be finite and strictly increasing (index {0})")]
    NonIncreasingTimestamps(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no timestamp pairs within the association window")]
    NoMatches,
    #[error("trajectory of {len} poses is too short for a gap of {delta}")]
    TrajectoryTooShort { len: usize, delta: usize },
    #[error("degenerate geometry: positions are collinear or coincident")]
    DegenerateGeometry,
    #[error(transparent)]
    Geometry(GeometryError),
}

impl From<GeometryError> for TrajError {
    fn from(e: GeometryError) -> Self {
        match e {
            GeometryError::DegenerateGeometry | GeometryError::TooFewPoints { .. } => TrajError::DegenerateGeometry,
            GeometryError::LengthMismatch(a, b) => TrajError::LengthMismatch(a, b),
            other => TrajError::Geometry(other),
        }
    }
}
