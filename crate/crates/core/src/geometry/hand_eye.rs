use nalgebra::{Matrix3, Vector3};

use super::GeometryError;

const ORTHONORMAL_TOL: f64 = 1e-6;

/// Camera-to-gripper transform `X_g = R·X_c + t`, translation in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandEye {
    rotation: Matrix3<f64>,
    translation_mm: Vector3<f64>,
}

impl HandEye {
    /// Rejects `rotation` unless it is orthonormal with determinant +1 (within 1e-6).
    pub fn new(rotation: Matrix3<f64>, translation_mm: Vector3<f64>) -> Result<Self, GeometryError> {
        let deviation = rotation_deviation(&rotation);
        if deviation > ORTHONORMAL_TOL {
            return Err(GeometryError::NotARotation { deviation });
        }
        Ok(Self {
            rotation,
            translation_mm,
        })
    }

    /// Accepts a rotation printed with limited precision and replaces it by
    /// the nearest proper rotation (polar decomposition).
    pub fn from_rounded(rotation: Matrix3<f64>, translation_mm: Vector3<f64>) -> Result<Self, GeometryError> {
        let svd = rotation.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(GeometryError::NotARotation { deviation: f64::INFINITY }),
        };
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            // A reflection is not a small rounding error.
            return Err(GeometryError::NotARotation {
                deviation: rotation_deviation(&rotation),
            });
        }
        // One Newton polish step of the polar iteration keeps det = +1 exact enough.
        r = 0.5 * (r + r.transpose().try_inverse().unwrap_or(r));
        Self::new(r, translation_mm)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation_mm(&self) -> &Vector3<f64> {
        &self.translation_mm
    }

    /// Maps a camera-frame point (mm) into the gripper frame (mm).
    pub fn apply(&self, camera_point_mm: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * camera_point_mm + self.translation_mm
    }

    pub fn miro_cam() -> Self {
        Self::tabulated(
            [[-0.9366, -0.3242, -0.1325], [0.1738, -0.1017, -0.9795], [0.3041, -0.9405, 0.1516]],
            [2.9793, -27.0224, 72.1070],
        )
    }

    pub fn high_cam() -> Self {
        Self::tabulated(
            [[0.9463, -0.0921, -0.3098], [-0.1389, 0.7495, -0.6472], [0.2918, -0.6555, 0.8965]],
            [-46.2017, 20.9074, 94.6349],
        )
    }

    pub fn low_cam() -> Self {
        Self::tabulated(
            [[0.8294, 0.5577, 0.0322], [-0.5586, 0.8286, 0.0379], [-0.0056, -0.0495, 0.9988]],
            [6.0169, 39.5114, 101.6431],
        )
    }

    fn tabulated(rows: [[f64; 3]; 3], t: [f64; 3]) -> Self {
        let r = Matrix3::from_fn(|i, j| rows[i][j]);
        Self::from_rounded(r, Vector3::from(t)).expect("tabulated hand-eye rotations are proper")
    }
}

/// Max-abs deviation of `RᵀR` from identity, or the determinant error.
fn rotation_deviation(r: &Matrix3<f64>) -> f64 {
    let ortho = (r.transpose() * r - Matrix3::identity()).abs().max();
    let det = (r.determinant() - 1.0).abs();
    ortho.max(det)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_maps_to_translation() {
        let cases = [
            (HandEye::miro_cam(), [2.9793, -27.0224, 72.1070]),
            (HandEye::high_cam(), [-46.2017, 20.9074, 94.6349]),
            (HandEye::low_cam(), [6.0169, 39.5114, 101.6431]),
        ];
        for (he, t) in cases {
            let g = he.apply(&Vector3::zeros());
            for k in 0..3 {
                assert!((g[k] - t[k]).abs() < 5e-5);
            }
        }
    }

    #[test]
    fn identity_is_noop() {
        let he = HandEye::new(Matrix3::identity(), Vector3::zeros()).unwrap();
        let x = Vector3::new(1.5, -2.0, 7.25);
        assert_eq!(he.apply(&x), x);
    }

    #[test]
    fn tabulated_rotations_are_proper_and_close_to_print() {
        let he = HandEye::miro_cam();
        assert!(rotation_deviation(he.rotation()) < 1e-12);
        assert!((he.rotation()[(0, 0)] - (-0.9366)).abs() < 5e-4);
    }

    #[test]
    fn rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.01);
        assert!(matches!(
            HandEye::new(m, Vector3::zeros()),
            Err(GeometryError::NotARotation { .. })
        ));
        let reflection = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(HandEye::from_rounded(reflection, Vector3::zeros()).is_err());
    }
}
