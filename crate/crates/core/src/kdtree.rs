//! Exact k-nearest-neighbor search in a k-d tree over fixed-dimension points.
//!
//! Used for descriptor matching (128-D) and ICP correspondences (3-D). The
//! search is exact: subtrees are only skipped when the splitting plane is
//! farther than the current k-th best distance.

use alloc::vec;
use alloc::vec::Vec;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf { start: usize, end: usize },
    Split { dim: usize, value: f64, left: usize, right: usize },
}

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

/// A neighbor: index into the points the tree was built from, and the
/// squared Euclidean distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl KdTree {
    /// `points` is a flat row-major array of `len / dim` points.
    pub fn new(points: Vec<f64>, dim: usize) -> Self {
        assert!(dim > 0 && points.len() % dim == 0, "flat point array must be a multiple of dim");
        let n = points.len() / dim;
        let mut tree = Self {
            dim,
            points,
            order: (0..n).collect(),
            nodes: Vec::new(),
        };
        if n > 0 {
            tree.build(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.points[index * self.dim..(index + 1) * self.dim]
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        // split on the dimension with the widest spread
        let mut best_dim = 0;
        let mut best_spread = -1.0;
        for d in 0..self.dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.order[start..end] {
                let v = self.points[i * self.dim + d];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > best_spread {
                best_spread = hi - lo;
                best_dim = d;
            }
        }
        if best_spread <= 0.0 {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let dim = self.dim;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |a, b| {
            pts[a * dim + best_dim].total_cmp(&pts[b * dim + best_dim])
        });
        let value = self.points[self.order[mid] * dim + best_dim];
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            dim: best_dim,
            value,
            left,
            right,
        };
        id
    }

    /// The `k` nearest points to `query`, closest first (ties by index).
    pub fn knn(&self, query: &[f64], k: usize) -> Vec<Neighbor> {
        assert_eq!(query.len(), self.dim);
        let mut best: Vec<Neighbor> = Vec::with_capacity(k + 1);
        if k == 0 || self.is_empty() {
            return best;
        }
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            match self.nodes[node] {
                Node::Leaf { start, end } => {
                    for &i in &self.order[start..end] {
                        let d = dist_sq(self.point(i), query);
                        insert_sorted(&mut best, Neighbor { index: i, dist_sq: d }, k);
                    }
                }
                Node::Split { dim, value, left, right } => {
                    let diff = query[dim] - value;
                    let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                    let bound = if best.len() < k { f64::INFINITY } else { best[best.len() - 1].dist_sq };
                    if diff * diff <= bound {
                        stack.push(far);
                    }
                    stack.push(near);
                }
            }
        }
        best
    }

    pub fn nearest(&self, query: &[f64]) -> Option<Neighbor> {
        self.knn(query, 1).into_iter().next()
    }
}

fn insert_sorted(best: &mut Vec<Neighbor>, cand: Neighbor, k: usize) {
    let key = |n: &Neighbor| (n.dist_sq, n.index);
    if best.len() == k {
        let last = &best[k - 1];
        if key(&cand) >= key(last) {
            return;
        }
    }
    let pos = best
        .iter()
        .position(|n| key(&cand) < key(n))
        .unwrap_or(best.len());
    best.insert(pos, cand);
    best.truncate(k);
}

#[inline]
pub(crate) fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for dim in [2, 3, 16] {
            let n = 300;
            let pts: Vec<f64> = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let tree = KdTree::new(pts.clone(), dim);
            for _ in 0..50 {
                let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.2..1.2)).collect();
                let mut brute: Vec<(f64, usize)> = (0..n).map(|i| (dist_sq(&pts[i * dim..(i + 1) * dim], &q), i)).collect();
                brute.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let got = tree.knn(&q, 5);
                for (g, b) in got.iter().zip(&brute) {
                    assert_eq!(g.index, b.1);
                    assert_eq!(g.dist_sq, b.0);
                }
            }
        }
    }

    #[test]
    fn duplicate_points_and_small_k() {
        let tree = KdTree::new(vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0], 2);
        let got = tree.knn(&[1.0, 1.0], 10);
        assert_eq!(got.len(), 3);
        assert_eq!(got[0].index, 0);
        assert_eq!(got[1].index, 1);
        assert!(KdTree::new(vec![], 3).knn(&[0.0, 0.0, 0.0], 2).is_empty());
    }
}
