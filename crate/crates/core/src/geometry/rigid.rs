//! Closed-form least-squares registration of paired 3D points (Horn's
//! unit-quaternion method).

use alloc::vec::Vec;

use nalgebra::{Matrix3, Matrix4, Quaternion, SymmetricEigen, UnitQuaternion, Vector3};

use super::{GeometryError, Pose};

/// `x ↦ scale·R·x + t`. `scale` is 1 for rigid fits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Similarity {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }

    /// Rigid part as a pose (the scale is dropped).
    pub fn rigid(&self) -> Pose {
        Pose::from_parts(self.rotation, self.translation)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// 4x4 homogeneous matrix `[s·R t; 0 1]`.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&(self.rotation_matrix() * self.scale));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// Finds the transform minimizing `Σ‖dst_i − (s·R·src_i + t)‖²`.
///
/// Needs at least three pairs whose source and destination sets both span
/// more than a line.
pub fn fit_rigid(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    with_scale: bool,
) -> Result<Similarity, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::LengthMismatch(src.len(), dst.len()));
    }
    if src.len() < 3 {
        return Err(GeometryError::TooFewPoints {
            needed: 3,
            got: src.len(),
        });
    }
    let n = src.len() as f64;
    let mu_s = src.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let mu_d = dst.iter().fold(Vector3::zeros(), |a, p| a + p) / n;
    let sc: Vec<Vector3<f64>> = src.iter().map(|p| p - mu_s).collect();
    let dc: Vec<Vector3<f64>> = dst.iter().map(|p| p - mu_d).collect();
    if is_degenerate(&sc) || is_degenerate(&dc) {
        return Err(GeometryError::DegenerateGeometry);
    }

    let mut m = Matrix3::zeros();
    for (a, b) in sc.iter().zip(&dc) {
        m += a * b.transpose();
    }
    let (sxx, sxy, sxz) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (syx, syy, syz) = (m[(1, 0)], m[(1, 1)], m[(1, 2)]);
    let (szx, szy, szz) = (m[(2, 0)], m[(2, 1)], m[(2, 2)]);
    #[rustfmt::skip]
    let nmat = Matrix4::new(
        sxx + syy + szz, syz - szy,        szx - sxz,        sxy - syx,
        syz - szy,       sxx - syy - szz,  sxy + syx,        szx + sxz,
        szx - sxz,       sxy + syx,        -sxx + syy - szz, syz + szy,
        sxy - syx,       szx + sxz,        syz + szy,        -sxx - syy + szz,
    );
    let eig = SymmetricEigen::new(nmat);
    let best = eig.eigenvalues.imax();
    let v = eig.eigenvectors.column(best);
    let rotation = UnitQuaternion::new_normalize(Quaternion::new(v[0], v[1], v[2], v[3]));

    let scale = if with_scale {
        let num: f64 = sc.iter().zip(&dc).map(|(a, b)| b.dot(&(rotation * a))).sum();
        let den: f64 = sc.iter().map(|a| a.norm_squared()).sum();
        num / den
    } else {
        1.0
    };
    let translation = mu_d - rotation * mu_s * scale;
    Ok(Similarity {
        rotation,
        translation,
        scale,
    })
}

/// A centered set is degenerate when its scatter has rank < 2.
fn is_degenerate(centered: &[Vector3<f64>]) -> bool {
    let mut c = Matrix3::zeros();
    for p in centered {
        c += p * p.transpose();
    }
    let mut ev: [f64; 3] = SymmetricEigen::new(c).eigenvalues.into();
    ev.sort_by(|a, b| b.total_cmp(a));
    !(ev[0] > 0.0) || ev[1] <= 1e-12 * ev[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(rng: &mut impl Rng, n: usize) -> Vec<Vector3<f64>> {
        (0..n)
            .map(|_| Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn recovers_exact_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let src = cloud(&mut rng, 20);
        let truth = Pose::from_rotation_vector(Vector3::new(0.3, -1.1, 2.0), Vector3::new(1.0, 2.0, -3.0));
        let dst: Vec<_> = src.iter().map(|p| truth.transform_point(p)).collect();
        let fit = fit_rigid(&src, &dst, false).unwrap();
        let err = fit.rigid().inverse().compose(&truth);
        assert!(err.rotation_angle() < 1e-9 && err.translation().norm() < 1e-9);
        assert_eq!(fit.scale, 1.0);
    }

    #[test]
    fn recovers_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let src = cloud(&mut rng, 10);
        let dst: Vec<_> = src.iter().map(|p| p * 2.5 + Vector3::new(0.1, 0.0, 0.0)).collect();
        let fit = fit_rigid(&src, &dst, true).unwrap();
        assert!((fit.scale - 2.5).abs() < 1e-9);
        assert!(fit.rigid().rotation_angle() < 1e-9);
    }

    #[test]
    fn collinear_points_are_degenerate() {
        let src: Vec<_> = (0..5).map(|i| Vector3::new(i as f64, 2.0 * i as f64, 0.0)).collect();
        assert_eq!(fit_rigid(&src, &src, false), Err(GeometryError::DegenerateGeometry));
        let same = [Vector3::new(1.0, 1.0, 1.0); 4];
        assert_eq!(fit_rigid(&same, &same, false), Err(GeometryError::DegenerateGeometry));
        assert!(matches!(fit_rigid(&src[..2], &src[..2], false), Err(GeometryError::TooFewPoints { .. })));
    }
}
