use alloc::vec::Vec;

use nalgebra::Vector3;

use super::ReconError;
use crate::geometry::Pose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Meters,
    Centimeters,
    Millimeters,
}

impl Unit {
    /// Multiply a length in this unit by this to get centimeters.
    pub fn to_cm(self) -> f64 {
        match self {
            Unit::Meters => 100.0,
            Unit::Centimeters => 1.0,
            Unit::Millimeters => 0.1,
        }
    }

    /// Factor converting lengths in `self` to lengths in `other`.
    pub fn factor_to(self, other: Unit) -> f64 {
        self.to_cm() / other.to_cm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
    unit: Unit,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>, unit: Unit) -> Result<Self, ReconError> {
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(ReconError::BadParameter("point coordinates must be finite"));
        }
        Ok(Self {
            points,
            normals: None,
            unit,
        })
    }

    pub fn with_normals(mut self, normals: Vec<Vector3<f64>>) -> Result<Self, ReconError> {
        if normals.len() != self.points.len() {
            return Err(ReconError::BadParameter("one normal per point required"));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, pose: &Pose) -> Self {
        Self {
            points: self.points.iter().map(|p| pose.transform_point(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| pose.rotation() * n).collect()),
            unit: self.unit,
        }
    }

    /// The same cloud expressed in another unit.
    pub fn converted(&self, unit: Unit) -> Self {
        let f = self.unit.factor_to(unit);
        Self {
            points: self.points.iter().map(|p| p * f).collect(),
            normals: self.normals.clone(),
            unit,
        }
    }

    /// Length of the bounding-box diagonal.
    pub fn extent(&self) -> f64 {
        let Some(first) = self.points.first() else { return 0.0 };
        let (lo, hi) = self
            .points
            .iter()
            .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        (hi - lo).norm()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
    unit: Unit,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>, unit: Unit) -> Result<Self, ReconError> {
        if vertices.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(ReconError::InvalidMesh("vertex coordinates must be finite"));
        }
        if faces.is_empty() {
            return Err(ReconError::InvalidMesh("mesh has no faces"));
        }
        if faces.iter().flatten().any(|&i| i >= vertices.len()) {
            return Err(ReconError::InvalidMesh("face index out of range"));
        }
        Ok(Self { vertices, faces, unit })
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn triangle(&self, f: usize) -> [Vector3<f64>; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn converted(&self, unit: Unit) -> Self {
        let f = self.unit.factor_to(unit);
        Self {
            vertices: self.vertices.iter().map(|p| p * f).collect(),
            faces: self.faces.clone(),
            unit,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn unit_factors() {
        assert_eq!(Unit::Millimeters.factor_to(Unit::Meters), 0.001);
        assert_eq!(Unit::Meters.factor_to(Unit::Centimeters), 100.0);
        let c = PointCloud::new(vec![Vector3::new(1.0, 2.0, 3.0)], Unit::Meters).unwrap();
        assert_eq!(c.converted(Unit::Millimeters).points()[0], Vector3::new(1000.0, 2000.0, 3000.0));
    }

    #[test]
    fn validation() {
        assert!(PointCloud::new(vec![Vector3::new(f64::NAN, 0.0, 0.0)], Unit::Meters).is_err());
        let v = vec![Vector3::zeros(); 3];
        assert!(TriMesh::new(v.clone(), vec![[0, 1, 3]], Unit::Meters).is_err());
        assert!(TriMesh::new(v.clone(), vec![], Unit::Meters).is_err());
        assert!(TriMesh::new(v, vec![[0, 1, 2]], Unit::Meters).is_ok());
    }
}
