//! Point-to-point ICP against a reference cloud or triangle mesh, with the
//! RMSE tracked in centimeters.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{UnitQuaternion, Vector3};
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::{PointCloud, ReconError, TriMesh};
use crate::geometry::{fit_rigid, Pose};
use crate::kdtree::KdTree;

#[derive(Debug, Clone, Copy)]
pub enum IcpTarget<'a> {
    Cloud(&'a PointCloud),
    Mesh(&'a TriMesh),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpOptions {
    pub max_iterations: usize,
    /// Stop at the first iteration whose RMSE change is below this.
    pub tolerance_cm: f64,
    /// Consecutive RMSE increases tolerated before giving up.
    pub max_increases: usize,
}

impl Default for IcpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            tolerance_cm: 0.001,
            max_increases: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// Maps source points (source units) onto the target.
    pub transform: Pose,
    /// RMSE before the first update, then after each update (cm).
    pub rmse_cm: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Cloud-to-target RMSE of `transform` (cm). After convergence this
    /// follows one closing fit to the last correspondences, so it can sit
    /// below the end of the series.
    pub final_rmse_cm: f64,
    /// Final per-point distance to the target, in source units.
    pub distances: Vec<f64>,
}


/// Nearest-point queries against either kind of target, in source units.
enum Nearest {
    Cloud { tree: KdTree, points: Vec<Vector3<f64>> },
    Mesh(Bvh),
}

impl Nearest {
    fn closest(&self, p: &Vector3<f64>) -> Vector3<f64> {
        match self {
            Nearest::Cloud { tree, points } => {
                let n = tree.nearest(p.as_slice()).expect("target is non-empty");
                points[n.index]
            }
            Nearest::Mesh(bvh) => bvh.closest(p),
        }
    }
}

pub fn icp_cloud_to_target(
    source: &PointCloud,
    target: IcpTarget<'_>,
    init: &Pose,
    opts: &IcpOptions,
) -> Result<IcpResult, ReconError> {
    if source.len() < 3 {
        return Err(ReconError::TooFewPoints {
            needed: 3,
            got: source.len(),
        });
    }
    let unit = source.unit();
    let nearest = match target {
        IcpTarget::Cloud(c) => {
            if c.len() < 3 {
                return Err(ReconError::TooFewPoints { needed: 3, got: c.len() });
            }
            let points = c.converted(unit).points().to_vec();
            let flat = points.iter().flat_map(|p| p.iter().copied()).collect();
            Nearest::Cloud {
                tree: KdTree::new(flat, 3),
                points,
            }
        }
        IcpTarget::Mesh(m) => Nearest::Mesh(Bvh::new(&m.converted(unit))),
    };
    let to_cm = unit.to_cm();
    let src = source.points();

    let correspond = |pose: &Pose| -> (Vec<Vector3<f64>>, f64) {
        let mut sq = 0.0;
        let closest = src
            .iter()
            .map(|p| {
                let q = pose.transform_point(p);
                let c = nearest.closest(&q);
                sq += (q - c).norm_squared();
                c
            })
            .collect();
        (closest, (sq / src.len() as f64).sqrt() * to_cm)
    };

    let mut pose = *init;
    let (mut closest, rmse) = correspond(&pose);
    let mut series = vec![rmse];
    let mut converged = false;
    let mut increases = 0;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        // absolute re-fit from the original points: no drift from chaining
        let fit = fit_rigid(src, &closest, false)?;
        pose = fit.rigid();
        let (next, rmse) = correspond(&pose);
        closest = next;
        let prev = *series.last().expect("non-empty");
        series.push(rmse);
        if (rmse - prev).abs() < opts.tolerance_cm {
            converged = true;
            break;
        }
        if rmse > prev {
            increases += 1;
            if increases >= opts.max_increases {
                return Err(ReconError::Diverged { iteration: iterations });
            }
        } else {
            increases = 0;
        }
    }
    let mut final_rmse = *series.last().expect("non-empty");
    if converged {
        // the last update was fitted to the previous correspondences; spend
        // the fresh ones too
        let pose_closed = fit_rigid(src, &closest, false)?.rigid();
        let (next, rmse) = correspond(&pose_closed);
        if rmse <= final_rmse {
            pose = pose_closed;
            closest = next;
            final_rmse = rmse;
        }
    }
    let distances = src
        .iter()
        .zip(&closest)
        .map(|(p, c)| (pose.transform_point(p) - c).norm())
        .collect();
    Ok(IcpResult {
        transform: pose,
        rmse_cm: series,
        converged,
        iterations,
        final_rmse_cm: final_rmse,
        distances,
    })
}

/// Coarse alignment from one segment marked in both clouds: midpoints are
/// matched and the source direction is turned onto the target direction by
/// the smallest rotation (the roll about the segment stays undetermined).
pub fn init_from_line_pairs(
    source: [Vector3<f64>; 2],
    target: [Vector3<f64>; 2],
) -> Result<Pose, ReconError> {
    let ds = source[1] - source[0];
    let dt = target[1] - target[0];
    if !(ds.norm() > 1e-12 && dt.norm() > 1e-12) {
        return Err(ReconError::BadParameter("line segment endpoints coincide"));
    }
    let rot = UnitQuaternion::rotation_between(&ds, &dt).unwrap_or_else(|| {
        // antiparallel: half turn about any axis orthogonal to the segment
        let axis = ds.cross(&Vector3::x());
        let axis = if axis.norm() > 1e-9 { axis } else { ds.cross(&Vector3::y()) };
        UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), core::f64::consts::PI)
    });
    let ms = (source[0] + source[1]) * 0.5;
    let mt = (target[0] + target[1]) * 0.5;
    Ok(Pose::from_parts(rot, mt - rot * ms))
}

/// Closest point to `p` on triangle `abc` (Voronoi-region walk).
pub fn closest_point_on_triangle(
    p: &Vector3<f64>,
    a: &Vector3<f64>,
    b: &Vector3<f64>,
    c: &Vector3<f64>,
) -> Vector3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    if !denom.is_finite() {
        // zero-area triangle: fall back to the closest edge point
        return [(a, b), (b, c), (a, c)]
            .iter()
            .map(|(u, v)| closest_on_segment(p, u, v))
            .min_by(|x, y| (x - p).norm_squared().total_cmp(&(y - p).norm_squared()))
            .expect("three edges");
    }
    a + ab * (vb * denom) + ac * (vc * denom)
}

fn closest_on_segment(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>) -> Vector3<f64> {
    let d = b - a;
    let l = d.norm_squared();
    if l == 0.0 {
        return *a;
    }
    a + d * ((p - a).dot(&d) / l).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vector3<f64>,
    hi: Vector3<f64>,
}

impl Aabb {
    fn of(tri: &[Vector3<f64>; 3]) -> Self {
        Self {
            lo: tri[0].inf(&tri[1]).inf(&tri[2]),
            hi: tri[0].sup(&tri[1]).sup(&tri[2]),
        }
    }

    fn merge(&self, o: &Aabb) -> Self {
        Self {
            lo: self.lo.inf(&o.lo),
            hi: self.hi.sup(&o.hi),
        }
    }

    fn dist_sq(&self, p: &Vector3<f64>) -> f64 {
        (0..3)
            .map(|i| {
                let d = (self.lo[i] - p[i]).max(0.0).max(p[i] - self.hi[i]);
                d * d
            })
            .sum()
    }
}

enum BvhNode {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl BvhNode {
    fn bounds(&self) -> &Aabb {
        match self {
            BvhNode::Leaf { bounds, .. } | BvhNode::Inner { bounds, .. } => bounds,
        }
    }
}

/// Median-split bounding volume hierarchy over mesh triangles.
struct Bvh {
    tris: Vec<[Vector3<f64>; 3]>,
    nodes: Vec<BvhNode>,
}

const BVH_LEAF: usize = 4;

impl Bvh {
    fn new(mesh: &TriMesh) -> Self {
        let mut tris: Vec<[Vector3<f64>; 3]> = (0..mesh.faces().len()).map(|f| mesh.triangle(f)).collect();
        let mut bvh = Self { tris: Vec::new(), nodes: Vec::new() };
        let n = tris.len();
        bvh.build(&mut tris, 0, n);
        bvh.tris = tris;
        bvh
    }

    fn build(&mut self, tris: &mut [[Vector3<f64>; 3]], start: usize, end: usize) -> usize {
        let bounds = tris[start..end]
            .iter()
            .map(Aabb::of)
            .reduce(|a, b| a.merge(&b))
            .expect("non-empty range");
        let id = self.nodes.len();
        if end - start <= BVH_LEAF {
            self.nodes.push(BvhNode::Leaf { bounds, start, end });
            return id;
        }
        let axis = (bounds.hi - bounds.lo).imax();
        let centroid = |t: &[Vector3<f64>; 3]| t[0][axis] + t[1][axis] + t[2][axis];
        tris[start..end].sort_by(|a, b| centroid(a).total_cmp(&centroid(b)));
        let mid = (start + end) / 2;
        self.nodes.push(BvhNode::Leaf { bounds, start, end });
        let left = self.build(tris, start, mid);
        let right = self.build(tris, mid, end);
        self.nodes[id] = BvhNode::Inner { bounds, left, right };
        id
    }

    fn closest(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let mut best = (f64::INFINITY, *p);
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            if node.bounds().dist_sq(p) >= best.0 {
                continue;
            }
            match *node {
                BvhNode::Leaf { start, end, .. } => {
                    for t in &self.tris[start..end] {
                        let c = closest_point_on_triangle(p, &t[0], &t[1], &t[2]);
                        let d = (c - p).norm_squared();
                        if d < best.0 {
                            best = (d, c);
                        }
                    }
                }
                BvhNode::Inner { left, right, .. } => {
                    let (dl, dr) = (self.nodes[left].bounds().dist_sq(p), self.nodes[right].bounds().dist_sq(p));
                    // visit the nearer child first
                    if dl < dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best.1
    }
}
