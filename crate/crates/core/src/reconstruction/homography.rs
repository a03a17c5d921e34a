use alloc::vec::Vec;

use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ReconError;

pub type Point2 = Vector2<f64>;

/// Planar projective map, stored with `h33 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Scales `m` so that `h33 = 1`; rejects singular matrices and `h33 ≈ 0`.
    pub fn new(m: Matrix3<f64>) -> Result<Self, ReconError> {
        let h33 = m[(2, 2)];
        if !(h33.abs() > 1e-12) || m.iter().any(|v| !v.is_finite()) {
            return Err(ReconError::DegenerateHomography);
        }
        let m = m / h33;
        if !(m.determinant().abs() > 1e-12) {
            return Err(ReconError::DegenerateHomography);
        }
        Ok(Self(m))
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        let mut m = Matrix3::identity();
        m[(0, 2)] = tx;
        m[(1, 2)] = ty;
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// `None` when the point maps to (or near) infinity.
    #[inline]
    pub fn apply(&self, p: &Point2) -> Option<Point2> {
        let v = self.0 * Vector3::new(p.x, p.y, 1.0);
        if v.z.abs() < 1e-12 {
            return None;
        }
        Some(Point2::new(v.x / v.z, v.y / v.z))
    }

    pub fn inverse(&self) -> Result<Self, ReconError> {
        let inv = self.0.try_inverse().ok_or(ReconError::DegenerateHomography)?;
        Self::new(inv)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Homography) -> Result<Self, ReconError> {
        Self::new(self.0 * other.0)
    }

    /// Forward transfer error `‖H·src − dst‖`, infinite when undefined.
    #[inline]
    pub fn transfer_error(&self, src: &Point2, dst: &Point2) -> f64 {
        self.apply(src).map_or(f64::INFINITY, |q| (q - dst).norm())
    }
}

/// Similarity that moves the centroid to the origin and the mean distance to √2.
fn normalizer(pts: impl Iterator<Item = Point2> + Clone) -> Matrix3<f64> {
    let n = pts.clone().count() as f64;
    let c = pts.clone().fold(Point2::zeros(), |a, p| a + p) / n;
    let mean_dist = pts.map(|p| (p - c).norm()).sum::<f64>() / n;
    let s = if mean_dist > 0.0 { core::f64::consts::SQRT_2 / mean_dist } else { 1.0 };
    Matrix3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0)
}

/// Normalized direct linear transform: the least-squares algebraic fit of
/// `dst ~ H·src` over all pairs.
pub fn dlt_homography(pairs: &[(Point2, Point2)]) -> Result<Homography, ReconError> {
    if pairs.len() < 4 {
        return Err(ReconError::InsufficientMatches {
            needed: 4,
            got: pairs.len(),
        });
    }
    let ts = normalizer(pairs.iter().map(|p| p.0));
    let td = normalizer(pairs.iter().map(|p| p.1));
    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in pairs.iter().enumerate() {
        let s = ts * Vector3::new(s.x, s.y, 1.0);
        let d = td * Vector3::new(d.x, d.y, 1.0);
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r0 = [-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u];
        let r1 = [0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v];
        for j in 0..9 {
            a[(2 * i, j)] = r0[j];
            a[(2 * i + 1, j)] = r1[j];
        }
    }
    let svd = a.svd(false, true);
    let vt = svd.v_t.ok_or(ReconError::DegenerateHomography)?;
    let h = vt.row(vt.nrows() - 1);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td.try_inverse().ok_or(ReconError::DegenerateHomography)?;
    Homography::new(td_inv * hn * ts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacOptions {
    /// Inlier threshold on the forward transfer error, in pixels.
    pub threshold: f64,
    pub max_iterations: usize,
    /// Stop once a sample set free of outliers has been drawn with this probability.
    pub confidence: f64,
    pub seed: u64,
}

impl Default for RansacOptions {
    fn default() -> Self {
        Self {
            threshold: 3.0,
            max_iterations: 2000,
            confidence: 0.999,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub homography: Homography,
    /// Indices into the input pairs, ascending.
    pub inliers: Vec<usize>,
}

fn has_collinear_triple(p: &[Point2; 4]) -> bool {
    let area = |a: &Point2, b: &Point2, c: &Point2| ((b - a).perp(&(c - a))).abs();
    let scale = p.iter().map(|q| q.norm()).fold(1.0, f64::max);
    let eps = 1e-9 * scale * scale;
    [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
        .iter()
        .any(|&(i, j, k)| area(&p[i], &p[j], &p[k]) <= eps)
}

fn inliers_of(h: &Homography, pairs: &[(Point2, Point2)], threshold: f64) -> (Vec<usize>, f64) {
    let mut idx = Vec::new();
    let mut cost = 0.0;
    for (i, (s, d)) in pairs.iter().enumerate() {
        let e = h.transfer_error(s, d);
        if e < threshold {
            idx.push(i);
            cost += e * e;
        }
    }
    (idx, cost)
}

/// Robust homography `dst ~ H·src` from putative matches.
///
/// Four-point samples are drawn with a seeded ChaCha8 generator, so results
/// are reproducible. The best consensus (most inliers, then least squared
/// error) is refit with the DLT on its inliers until the inlier set stops
/// changing.
pub fn ransac_homography(pairs: &[(Point2, Point2)], opts: &RansacOptions) -> Result<RansacResult, ReconError> {
    let n = pairs.len();
    if n < 4 {
        return Err(ReconError::InsufficientMatches { needed: 4, got: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut needed = opts.max_iterations;
    let mut iter = 0;
    while iter < needed.min(opts.max_iterations) {
        iter += 1;
        let pick = sample(&mut rng, n, 4);
        let idx = [pick.index(0), pick.index(1), pick.index(2), pick.index(3)];
        let src = idx.map(|i| pairs[i].0);
        let dst = idx.map(|i| pairs[i].1);
        if has_collinear_triple(&src) || has_collinear_triple(&dst) {
            continue;
        }
        let sample_pairs: Vec<(Point2, Point2)> = idx.iter().map(|&i| pairs[i]).collect();
        let Ok(h) = dlt_homography(&sample_pairs) else { continue };
        let (inl, cost) = inliers_of(&h, pairs, opts.threshold);
        let better = match &best {
            None => true,
            Some((b, bc)) => inl.len() > b.len() || (inl.len() == b.len() && cost < *bc),
        };
        if better {
            let w = inl.len() as f64 / n as f64;
            let p_good = w.powi(4);
            needed = if p_good >= 1.0 - 1e-12 {
                iter
            } else if p_good <= 0.0 {
                opts.max_iterations
            } else {
                let k = (1.0 - opts.confidence).ln() / (1.0 - p_good).ln();
                (k.ceil() as usize).max(iter)
            };
            best = Some((inl, cost));
        }
    }
    let (mut inliers, _) = best.ok_or(ReconError::NoConsensus)?;
    if inliers.len() < 4 {
        return Err(ReconError::NoConsensus);
    }
    let mut h = Homography::identity();
    for _ in 0..10 {
        let sub: Vec<(Point2, Point2)> = inliers.iter().map(|&i| pairs[i]).collect();
        h = dlt_homography(&sub)?;
        let (next, _) = inliers_of(&h, pairs, opts.threshold);
        if next == inliers || next.len() < 4 {
            break;
        }
        inliers = next;
    }
    Ok(RansacResult { homography: h, inliers })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn true_h() -> Homography {
        Homography::new(Matrix3::new(1.05, 0.08, 12.0, -0.04, 0.97, -7.5, 2e-4, -1e-4, 1.0)).unwrap()
    }

    fn exact_pairs(rng: &mut impl Rng, h: &Homography, n: usize) -> Vec<(Point2, Point2)> {
        (0..n)
            .map(|_| {
                let p = Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
                (p, h.apply(&p).unwrap())
            })
            .collect()
    }

    fn rel_err(a: &Homography, b: &Homography) -> f64 {
        (a.matrix() - b.matrix()).norm() / b.matrix().norm()
    }

    #[test]
    fn dlt_recovers_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = true_h();
        let pairs = exact_pairs(&mut rng, &h, 4);
        assert!(rel_err(&dlt_homography(&pairs).unwrap(), &h) < 1e-6);
        let pairs = exact_pairs(&mut rng, &h, 50);
        assert!(rel_err(&dlt_homography(&pairs).unwrap(), &h) < 1e-9);
    }

    #[test]
    fn ransac_without_outliers_equals_full_dlt() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pairs = exact_pairs(&mut rng, &true_h(), 60);
        let r = ransac_homography(&pairs, &RansacOptions::default()).unwrap();
        assert_eq!(r.inliers, (0..60).collect::<Vec<_>>());
        let full = dlt_homography(&pairs).unwrap();
        assert!((r.homography.matrix() - full.matrix()).abs().max() < 1e-9);
    }

    #[test]
    fn ransac_rejects_outliers() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let h = true_h();
            let mut pairs = exact_pairs(&mut rng, &h, 70);
            for _ in 0..30 {
                pairs.push((
                    Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)),
                    Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)),
                ));
            }
            let r = ransac_homography(&pairs, &RansacOptions { seed, ..Default::default() }).unwrap();
            for (s, d) in &pairs[..70] {
                assert!(r.homography.transfer_error(s, d) < 0.5);
            }
            assert!(r.inliers.iter().take(70).eq((0..70).collect::<Vec<_>>().iter()));
        }
    }

    #[test]
    fn too_few_matches() {
        let p = Point2::zeros();
        assert_eq!(
            ransac_homography(&[(p, p); 3], &RansacOptions::default()),
            Err(ReconError::InsufficientMatches { needed: 4, got: 3 })
        );
    }

    #[test]
    fn compose_and_inverse() {
        let h = true_h();
        let id = h.compose(&h.inverse().unwrap()).unwrap();
        assert!((id.matrix() - Matrix3::identity()).abs().max() < 1e-9);
        let t = Homography::translation(3.0, -2.0);
        assert_eq!(t.apply(&Point2::new(1.0, 1.0)).unwrap(), Point2::new(4.0, -1.0));
    }
}
