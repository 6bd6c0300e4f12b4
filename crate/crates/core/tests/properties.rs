use nalgebra::{Matrix3, SymmetricEigen};
use proptest::prelude::*;

use mpm_core::contact::{correct_curve_contact, correct_surface_contact, particle_pushout, ContactParams};
use mpm_core::geometry::{
    curve_query, sdf_primitive, slicer_query, ArcGeometry, Geometry, Polyline, Shape, ShapePose, SlicerMesh,
    SlicerRegion,
};
use mpm_core::material::{corotational_project, neo_hookean_cauchy_stress};
use mpm_core::math::{polar_decompose, quadratic_bspline_weights, Mat3, Quat, Real, Vec3};
use mpm_core::rigid::{Keyframe, KinematicTrajectory};
use mpm_core::state::Particles;

fn vec3(range: std::ops::Range<Real>) -> impl Strategy<Value = Vec3> {
    (range.clone(), range.clone(), range).prop_map(|(x, y, z)| Vec3::new(x, y, z))
}

fn unit_quat() -> impl Strategy<Value = Quat> {
    (vec3(-1.0..1.0), -1.0f32..1.0)
        .prop_filter("non-degenerate", |(v, w)| v.norm_squared() + w * w > 0.05)
        .prop_map(|(v, w)| Quat::from_quaternion(nalgebra::Quaternion::new(w, v.x, v.y, v.z)))
}

fn positive_det_matrix() -> impl Strategy<Value = Mat3> {
    prop::array::uniform9(-1.0f32..1.0)
        .prop_map(|a| Mat3::from_row_slice(&a) + Mat3::identity() * 1.5)
        .prop_filter("det bounded away from zero", |m| m.determinant() > 0.1)
}

fn blade() -> Shape {
    let quad = SlicerMesh::quad(
        [
            Vec3::new(-0.5, -0.5, 0.0),
            Vec3::new(0.5, -0.5, 0.0),
            Vec3::new(0.5, 0.5, 0.0),
            Vec3::new(-0.5, 0.5, 0.0),
        ],
        2,
        0.05,
    )
    .unwrap();
    Shape::new(0, Geometry::QuadSlicer(quad), ShapePose::default(), 0.2, 1.0, 0.1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn weights_partition_unity(p in vec3(0.25..1.25)) {
        let sw = quadratic_bspline_weights(&p, &Vec3::zeros(), 0.1, [16; 3]).unwrap();
        let mut total = 0.0;
        let mut grad = Vec3::zeros();
        for c in 0..3 {
            for b in 0..3 {
                for a in 0..3 {
                    total += sw.weight(a, b, c);
                    grad += sw.gradient(a, b, c);
                }
            }
        }
        prop_assert!((total - 1.0).abs() < 1e-6);
        prop_assert!((grad * 0.1).amax() < 1e-5);
    }

    #[test]
    fn polar_matches_eigen_oracle(m in positive_det_matrix()) {
        let (r, u) = polar_decompose(&m).unwrap();
        prop_assert!((r.transpose() * r - Mat3::identity()).amax() < 1e-5);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-5);
        prop_assert!((u - u.transpose()).amax() < 1e-5);
        prop_assert!((r * u - m).amax() < 1e-5);
        let m64 = m.cast::<f64>();
        let eig = SymmetricEigen::new(m64.transpose() * m64);
        prop_assert!(eig.eigenvalues.iter().all(|l| *l > 0.0));
        let u_ref = eig.eigenvectors * Matrix3::from_diagonal(&eig.eigenvalues.map(f64::sqrt)) * eig.eigenvectors.transpose();
        prop_assert!((u.cast::<f64>() - u_ref).amax() < 1e-5);
    }

    #[test]
    fn stress_is_symmetric_and_rotation_free(m in positive_det_matrix(), q in unit_quat()) {
        let s = neo_hookean_cauchy_stress(&m, 2.0, 3.0).unwrap();
        prop_assert!((s - s.transpose()).amax() < 1e-5 * (1.0 + s.amax()));
        let r = *q.to_rotation_matrix().matrix();
        prop_assert!(neo_hookean_cauchy_stress(&r, 2.0, 3.0).unwrap().amax() < 1e-5);
    }

    #[test]
    fn projection_is_idempotent_on_rotations(q in unit_quat(), angle in -0.3f32..0.3) {
        let dt = 0.02;
        let f_prev = *q.to_rotation_matrix().matrix();
        let step = *Quat::from_scaled_axis(Vec3::new(0.3, -0.2, 0.9).normalize() * angle).to_rotation_matrix().matrix();
        let c = (step - Mat3::identity()) / dt;
        let c1 = corotational_project(&f_prev, &c, dt, 1.0).unwrap();
        let c2 = corotational_project(&f_prev, &c1, dt, 1.0).unwrap();
        prop_assert!(((c2 - c1) * dt).amax() < 1e-5);
    }

    #[test]
    fn primitive_normals_match_finite_differences(p in vec3(-1.5..1.5), q in unit_quat()) {
        let pose = ShapePose { position: Vec3::new(0.1, -0.2, 0.3), orientation: q, ..ShapePose::default() };
        let shapes = [
            Geometry::plane(Vec3::new(0.2, 1.0, -0.3)).unwrap(),
            Geometry::sphere(0.7).unwrap(),
            Geometry::cuboid(Vec3::new(0.5, 0.3, 0.8)).unwrap(),
        ];
        let h = 1e-3;
        for g in &shapes {
            let s = sdf_primitive(g, &pose, &p).unwrap();
            let fd = Vec3::from_fn(|a, _| {
                let mut e = Vec3::zeros();
                e[a] = h;
                (sdf_primitive(g, &pose, &(p + e)).unwrap().distance - sdf_primitive(g, &pose, &(p - e)).unwrap().distance) / (2.0 * h)
            });
            prop_assert!((s.normal.norm() - 1.0).abs() < 1e-4);
            // Skip points near kinks of the box field, where the gradient jumps.
            if (fd.norm() - 1.0).abs() < 1e-2 {
                prop_assert!((fd - s.normal).norm() < 2e-2, "{:?} fd {:?} normal {:?}", g, fd, s.normal);
            }
        }
    }

    #[test]
    fn slicer_distance_flips_across_the_blade(x in -0.4f32..0.4, y in -0.4f32..0.35, z in 0.001f32..0.5) {
        let b = blade();
        let above = slicer_query(&b.geometry, &b.pose, &Vec3::new(x, y, z), b.collision_halfwidth).unwrap();
        let below = slicer_query(&b.geometry, &b.pose, &Vec3::new(x, y, -z), b.collision_halfwidth).unwrap();
        if above.region != Some(SlicerRegion::Spine) {
            prop_assert!((above.distance + below.distance).abs() < 1e-5);
            prop_assert!((above.distance - z).abs() < 1e-5);
            prop_assert!((above.normal + below.normal).norm() < 1e-5);
            prop_assert!((above.normal - Vec3::z()).norm() < 1e-5);
            let expect = if z < b.collision_halfwidth { SlicerRegion::Edge } else { SlicerRegion::Bulk };
            prop_assert_eq!(above.region, Some(expect));
        }
    }

    #[test]
    fn slicer_pushout_keeps_particles_on_their_side(points in prop::collection::vec((-0.4f32..0.4, -0.4f32..0.3, -0.05f32..0.05), 1..40)) {
        let b = blade();
        let mut particles = Particles::default();
        for (x, y, z) in &points {
            particles.push(Vec3::new(*x, *y, *z), Vec3::new(0.0, 0.0, -z.signum()), 1.0, 1.0, 0);
        }
        let before: Vec<Real> = particles.x.iter().map(|p| b.query(p).distance).collect();
        particle_pushout(&mut particles, std::slice::from_ref(&b), 0.02, None);
        for (i, p) in particles.x.iter().enumerate() {
            let s = b.query(p);
            if s.region == Some(SlicerRegion::Spine) || before[i] == 0.0 {
                continue;
            }
            prop_assert_eq!(s.distance.signum(), before[i].signum());
            prop_assert!(s.distance.abs() >= 0.5 * b.collision_halfwidth - 1e-6);
            // Motion into the blade has been removed.
            let vn = particles.v[i].dot(&s.normal);
            prop_assert!(vn >= -1e-6);
        }
    }

    #[test]
    fn arc_projection_matches_brute_force(p in vec3(-2.0..2.0), angle in 0.3f32..6.2) {
        let arc = ArcGeometry::new(1.2, angle).unwrap();
        let g = Geometry::Arc(arc);
        let s = curve_query(&g, &ShapePose::default(), &p).unwrap();
        let best = (0..=20000)
            .map(|k| (p - arc.point_at(angle * k as Real / 20000.0)).norm())
            .fold(Real::INFINITY, Real::min);
        prop_assert!((s.distance - best).abs() < 1e-3, "query {} brute {}", s.distance, best);
        prop_assert!(s.distance >= 0.0);
        prop_assert!((s.normal.norm() - 1.0).abs() < 1e-4);
        if !s.at_curve_end {
            prop_assert!(s.normal.dot(&s.tangent.unwrap()).abs() < 1e-4);
        }
    }

    #[test]
    fn polyline_projection_matches_brute_force(p in vec3(-2.0..2.0), pts in prop::collection::vec(vec3(-1.0..1.0), 2..6)) {
        prop_assume!(pts.windows(2).all(|w| (w[1] - w[0]).norm() > 1e-2));
        let line = Polyline::new(pts.clone()).unwrap();
        let s = curve_query(&Geometry::ConnectedLineSegments(line), &ShapePose::default(), &p).unwrap();
        let mut best = Real::INFINITY;
        for w in pts.windows(2) {
            for k in 0..=2000 {
                let t = k as Real / 2000.0;
                best = best.min((p - (w[0] + (w[1] - w[0]) * t)).norm());
            }
        }
        prop_assert!((s.distance - best).abs() < 2e-3);
        prop_assert!((s.tangent.unwrap().norm() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn surface_contact_never_leaves_inward_motion(v in vec3(-2.0..2.0), vr in vec3(-1.0..1.0), n in vec3(-1.0..1.0), mu in 0.0f32..1.0, cd in 0.5f32..1.0) {
        prop_assume!(n.norm() > 0.1);
        let n = n.normalize();
        let params = ContactParams { mu_k: mu, c_d: cd, collision_halfwidth: 0.01 };
        let (out, dv) = correct_surface_contact(&v, &vr, &n, &params);
        prop_assert!(((out - v) - dv).norm() < 1e-5);
        let rel_in = (v - vr).dot(&n);
        let rel_out = out - vr;
        if rel_in >= 0.0 {
            prop_assert_eq!(out, v);
        } else {
            prop_assert!(rel_out.dot(&n).abs() < 1e-5);
            let t_in = (v - vr) - n * rel_in;
            prop_assert!(rel_out.norm() <= t_in.norm() + 1e-5);
            prop_assert!(rel_out.dot(&t_in) >= -1e-5);
        }
    }

    #[test]
    fn curve_contact_keeps_only_the_tangent(v in vec3(-2.0..2.0), vr in vec3(-1.0..1.0), t in vec3(-1.0..1.0), mu in 0.0f32..1.0) {
        prop_assume!(t.norm() > 0.1);
        let t = t.normalize();
        let params = ContactParams { mu_k: mu, c_d: 1.0, collision_halfwidth: 0.01 };
        let (out, _) = correct_curve_contact(&v, &vr, &Vec3::zeros(), &t, &params);
        let rel = out - vr;
        prop_assert!((rel - t * rel.dot(&t)).norm() < 1e-5);
        prop_assert!(rel.dot(&t).abs() <= (v - vr).dot(&t).abs() + 1e-5);
    }

    #[test]
    fn trajectory_hits_keyframes(q0 in unit_quat(), q1 in unit_quat(), p1 in vec3(-1.0..1.0), s in 0.0f32..1.0) {
        let traj = KinematicTrajectory::new(vec![
            Keyframe { time: 0.0, position: Vec3::zeros(), orientation: q0 },
            Keyframe { time: 2.0, position: p1, orientation: q1 },
        ]).unwrap();
        let a = traj.evaluate(0.0);
        let b = traj.evaluate(2.0);
        prop_assert!((a.position).norm() < 1e-6);
        prop_assert!((b.position - p1).norm() < 1e-5);
        prop_assert!(a.orientation.angle_to(&q0) < 1e-3);
        prop_assert!(b.orientation.angle_to(&q1) < 1e-3);
        let mid = traj.evaluate(2.0 * s);
        prop_assert!((mid.orientation.into_inner().norm() - 1.0).abs() < 1e-5);
        prop_assert!((mid.linear_velocity - p1 / 2.0).norm() < 1e-4);
        prop_assert!(traj.evaluate(5.0).linear_velocity.norm() == 0.0);
    }
}
