use core::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Quaternion, Rotation3, UnitQuaternion, Vector3, Vector4};
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use super::GeometryError;

/// Rigid transform in SE(3): a unit quaternion and a translation.
///
/// The quaternion is stored and exchanged in `(x, y, z, w)` order, the same
/// order used by the pose CSV files. `transform_point` applies rotation first,
/// then translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Builds a pose from an `(x, y, z, w)` quaternion and a translation.
    ///
    /// The quaternion is normalized unless it already has unit norm to within
    /// a few ulps; keeping such input verbatim makes write/read cycles
    /// lossless.
    pub fn new(q_xyzw: [f64; 4], translation: [f64; 3]) -> Result<Self, GeometryError> {
        let [x, y, z, w] = q_xyzw;
        let q = Quaternion::new(w, x, y, z);
        let norm = q.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(GeometryError::ZeroQuaternion);
        }
        let rotation = if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::new_normalize(q)
        };
        Ok(Self {
            rotation,
            translation: Vector3::from(translation),
        })
    }

    pub fn from_parts(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: UnitQuaternion::new_normalize(rotation.into_inner()),
            translation,
        }
    }

    /// Rotation given as an axis-angle vector (radians), plus a translation.
    pub fn from_rotation_vector(rotation: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: UnitQuaternion::from_scaled_axis(rotation),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation,
        }
    }

    /// Projects the upper-left 3x3 block onto SO(3) before converting.
    pub fn from_matrix(m: &Matrix4<f64>) -> Self {
        let r: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
        let rot = Rotation3::from_matrix(&r);
        Self {
            rotation: UnitQuaternion::from_rotation_matrix(&rot),
            translation: Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]),
        }
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn quaternion_xyzw(&self) -> [f64; 4] {
        let c: Vector4<f64> = self.rotation.coords;
        [c.x, c.y, c.z, c.w]
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let q = self.rotation * other.rotation;
        Pose {
            rotation: UnitQuaternion::new_normalize(q.into_inner()),
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.rotation.inverse();
        Pose {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Positive rotation angle in `[0, π]`, i.e. `2·acos(|w|)`.
    ///
    /// Evaluated as `2·atan2(|v|, |w|)`, which is the same quantity but keeps
    /// full precision for angles close to zero.
    pub fn rotation_angle(&self) -> f64 {
        let c = &self.rotation.coords;
        let v = (c.x * c.x + c.y * c.y + c.z * c.z).sqrt();
        2.0 * v.atan2(c.w.abs())
    }

    /// Axis-angle vector of the rotation (radians).
    pub fn rotation_vector(&self) -> Vector3<f64> {
        self.rotation.scaled_axis()
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl<'a> Mul<&'a Pose> for &'a Pose {
    type Output = Pose;

    fn mul(self, rhs: &'a Pose) -> Pose {
        self.compose(rhs)
    }
}
