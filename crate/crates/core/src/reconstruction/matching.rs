//! Descriptor matching: exact k-nearest neighbours through a k-d tree and
//! the nearest/second-nearest ratio filter.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::{FeatureSet, ReconError, DESCRIPTOR_LEN};
use crate::kdtree::KdTree;

pub const DEFAULT_RATIO: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub query: usize,
    pub train: usize,
    /// Euclidean descriptor distance.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnnMatches {
    /// For every query feature, its neighbours in the train set, closest first.
    pub neighbors: Vec<Vec<Match>>,
    /// Set when `k` exceeded the train set size and was reduced to it.
    pub clamped: bool,
}

pub fn match_knn(query: &FeatureSet, train: &FeatureSet, k: usize) -> Result<KnnMatches, ReconError> {
    if query.is_empty() || train.is_empty() {
        return Err(ReconError::EmptySet);
    }
    let clamped = k > train.len();
    let k = k.min(train.len());
    let tree = KdTree::new(train.descriptors().to_vec(), DESCRIPTOR_LEN);
    let neighbors = (0..query.len())
        .map(|q| {
            tree.knn(query.descriptor(q), k)
                .into_iter()
                .map(|n| Match {
                    query: q,
                    train: n.index,
                    distance: n.dist_sq.sqrt(),
                })
                .collect()
        })
        .collect();
    Ok(KnnMatches { neighbors, clamped })
}

/// Nearest neighbours whose distance is below `ratio` times the second
/// nearest. With a single train feature every nearest neighbour is kept.
pub fn ratio_matches(query: &FeatureSet, train: &FeatureSet, ratio: f64) -> Result<Vec<Match>, ReconError> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(ReconError::BadParameter("ratio must lie in (0, 1]"));
    }
    let knn = match_knn(query, train, 2)?;
    Ok(knn
        .neighbors
        .into_iter()
        .filter_map(|n| match n.as_slice() {
            [best] => Some(*best),
            [best, second] if best.distance < ratio * second.distance => Some(*best),
            _ => None,
        })
        .collect())
}
