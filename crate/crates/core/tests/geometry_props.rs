use approx::assert_relative_eq;
use endovo_core::geometry::{fit_rigid, CameraIntrinsics, CameraModel, Pose};
use nalgebra::{Matrix4, Vector2, Vector3};
use proptest::prelude::*;

fn pose() -> impl Strategy<Value = Pose> {
    (prop::array::uniform3(-3.0..3.0f64), prop::array::uniform3(-10.0..10.0f64))
        .prop_map(|(r, t)| Pose::from_rotation_vector(Vector3::from(r), Vector3::from(t)))
}

fn point() -> impl Strategy<Value = Vector3<f64>> {
    prop::array::uniform3(-50.0..50.0f64).prop_map(Vector3::from)
}

proptest! {
    #[test]
    fn composition_matches_matrix_product(a in pose(), b in pose(), p in point()) {
        let m: Matrix4<f64> = a.to_matrix() * b.to_matrix();
        let c = a.compose(&b);
        assert_relative_eq!(c.to_matrix(), m, epsilon = 1e-9);
        let h = m * p.push(1.0);
        assert_relative_eq!(c.transform_point(&p), h.xyz(), epsilon = 1e-9);
    }

    #[test]
    fn inverse_undoes_the_transform(a in pose(), p in point()) {
        assert_relative_eq!(a.inverse().transform_point(&a.transform_point(&p)), p, epsilon = 1e-9);
        prop_assert!(a.compose(&a.inverse()).rotation_angle() < 1e-7);
    }

    #[test]
    fn rotation_vector_roundtrips_below_pi(r in prop::array::uniform3(-1.7..1.7f64)) {
        let v = Vector3::from(r);
        prop_assume!(v.norm() < std::f64::consts::PI - 1e-3);
        let p = Pose::from_rotation_vector(v, Vector3::zeros());
        assert_relative_eq!(p.rotation_vector(), v, epsilon = 1e-9);
        assert_relative_eq!(p.rotation_angle(), v.norm(), epsilon = 1e-9);
    }

    #[test]
    fn rigid_fit_recovers_a_similarity(
        pts in prop::collection::vec(point(), 4..30),
        motion in pose(),
        scale in 0.2..5.0f64,
    ) {
        let dst: Vec<_> = pts.iter().map(|p| motion.transform_point(&(p * scale))).collect();
        let centroid = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
        let spread = pts.iter().map(|p| (p - centroid).norm()).fold(0.0, f64::max);
        prop_assume!(spread > 1.0);
        match fit_rigid(&pts, &dst, true) {
            Ok(s) => {
                for (p, q) in pts.iter().zip(&dst) {
                    assert_relative_eq!(s.apply(p), *q, epsilon = 1e-6 * (1.0 + q.norm()));
                }
                assert_relative_eq!(s.scale, scale, epsilon = 1e-8 * scale);
            }
            // nearly collinear draws are rejected rather than fitted badly
            Err(_) => {}
        }
    }

    #[test]
    fn distorted_projection_inverts(
        k1 in -0.3..0.3f64,
        k2 in -0.05..0.05f64,
        fisheye in any::<bool>(),
        px in 10.0..310.0f64,
        py in 10.0..230.0f64,
        depth in 0.1..100.0f64,
    ) {
        let model = if fisheye { CameraModel::Fisheye } else { CameraModel::Pinhole };
        let k = CameraIntrinsics::new(model, 250.0, 240.0, 0.0, 160.0, 120.0, k1, k2, 320, 240).unwrap();
        let pix = Vector2::new(px, py);
        if let Ok(x) = k.unproject(&pix, depth) {
            assert_relative_eq!(x.z, depth, epsilon = 1e-9 * depth);
            let back = k.project(&x).unwrap();
            assert_relative_eq!(back, pix, epsilon = 1e-6);
        }
    }
}
