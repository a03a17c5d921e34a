//! Surface reconstruction from endoscopic frames: features and matching,
//! RANSAC homographies, panorama stitching, specular highlight suppression,
//! shape from shading, and ICP registration against reference scans.

mod cloud;
mod features;
mod homography;
mod icp;
mod matching;
mod sfs;
mod specular;
mod stitch;

pub use cloud::{PointCloud, TriMesh, Unit};
pub use features::{detect_and_describe, Detector, DogParams, FeatureSet, HarrisParams, Keypoint, DESCRIPTOR_LEN};
pub use homography::{dlt_homography, ransac_homography, Homography, Point2, RansacOptions, RansacResult};
pub use icp::{
    closest_point_on_triangle, icp_cloud_to_target, init_from_line_pairs, IcpOptions, IcpResult, IcpTarget,
};
pub use matching::{match_knn, ratio_matches, KnnMatches, Match, DEFAULT_RATIO};
pub use sfs::{tsai_shah_sfs, SfsOptions, SurfacePrior};
pub use specular::{suppress_specular, SpecularOptions};
pub use stitch::{compose_panorama, stitch, Panorama, StitchOptions, StitchResult};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::imaging::ImagingError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReconError {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("no features detected")]
    NoFeatures,
    #[error("feature set is empty")]
    EmptySet,
    #[error("need at least {needed} matches, got {got}")]
    InsufficientMatches { needed: usize, got: usize },
    #[error("no consensus among matches")]
    NoConsensus,
    #[error("homography is singular or maps points to infinity")]
    DegenerateHomography,
    #[error("panorama canvas {width}x{height} is too large")]
    CanvasTooLarge { width: f64, height: f64 },
    #[error("light direction must have unit length (norm {0})")]
    NonUnitLight(f64),
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("ICP diverged at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("invalid mesh: {0}")]
    InvalidMesh(&'static str),
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
}
