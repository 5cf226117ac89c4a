mod common;

use common::*;
use pnpf_core::{
    geodesic_distance, project, solve_epnp, solve_epnp_irls, CorrespondenceSet, Error, LossKind,
    PinholeCamera, RigidPose, Rotation, Vec2, Vec3,
};
use rand::Rng;

#[test]
fn noise_free_recovery_over_random_scenes() {
    let mut rng = rng(2024);
    for case in 0..200 {
        let n = rng.random_range(6..=200);
        let depth = rng.random_range(2.0..20.0);
        let f = (rng.random_range(300f64.ln()..3000f64.ln())).exp();
        let camera = PinholeCamera::new(f, 640, 480).unwrap();
        let pose = random_pose(&mut rng, depth);
        let points = random_points(&mut rng, n, 0.5);
        let corrs = exact_set(&points, &pose, &camera);
        let est = solve_epnp(&corrs, &camera).unwrap();
        let e_r = geodesic_distance(&est.rotation, &pose.rotation);
        let e_t = rel_translation_error(&est.translation, &pose.translation);
        assert!(
            e_r < 1e-6 && e_t < 1e-6,
            "case {case}: n={n} e_r={e_r} e_t={e_t}"
        );
    }
}

#[test]
fn cube_example_and_half_focal() {
    let mut rng = rng(8);
    let cube: Vec<Vec3> = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { -1.0 } else { 1.0 },
                if i & 2 == 0 { -1.0 } else { 1.0 },
                if i & 4 == 0 { -1.0 } else { 1.0 },
            )
        })
        .collect();
    let pose = RigidPose::new(random_rotation(&mut rng), Vec3::new(0.3, -0.2, 6.0));
    let camera = PinholeCamera::new(800.0, 640, 480).unwrap();
    let corrs = exact_set(&cube, &pose, &camera);

    let est = solve_epnp(&corrs, &camera).unwrap();
    assert!(geodesic_distance(&est.rotation, &pose.rotation) < 1e-6);
    assert!((est.translation - pose.translation).norm() < 1e-6);

    // at half the focal length the object moves to about half the distance
    let half = camera.with_focal(400.0);
    let est = solve_epnp(&corrs, &half).unwrap();
    let ratio = est.translation.norm() / pose.translation.norm();
    assert!((ratio - 0.5).abs() < 0.1, "ratio {ratio}");
    let uv: Vec<Vec2> = corrs.iter().map(|c| c.point2).collect();
    let (lo, hi) = uv.iter().fold(
        (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(p), hi.sup(p)),
    );
    let mean = corrs
        .iter()
        .map(|c| (project(&c.point3, &est, &half).unwrap() - c.point2).norm())
        .sum::<f64>()
        / 8.0;
    // the cube spans a third of its distance, so perspective cannot be
    // absorbed exactly; the error stays small relative to the object
    assert!(mean < 0.1 * (hi - lo).norm(), "mean reprojection {mean}");
}

#[test]
fn focal_ratio_ambiguity_on_distant_objects() {
    let mut rng = rng(77);
    let scales = [0.7, 0.85, 1.0, 1.2, 1.4];
    for &s in &scales {
        let mut rel_errors = Vec::new();
        for _ in 0..50 {
            let depth = rng.random_range(50.0..100.0);
            let f = rng.random_range(2000.0..4000.0);
            let camera = PinholeCamera::new(f, 640, 480).unwrap();
            let pose = random_pose(&mut rng, depth);
            // object radius is at most 2% of the distance
            let points = random_points(&mut rng, 30, 0.01 * depth / 3f64.sqrt());
            let corrs = exact_set(&points, &pose, &camera);
            let cam_s = camera.with_focal(s * f);
            let est = solve_epnp(&corrs, &cam_s).unwrap();
            let uv: Vec<Vec2> = corrs.iter().map(|c| c.point2).collect();
            let (lo, hi) = uv.iter().fold(
                (Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY)),
                |(lo, hi), p| (lo.inf(p), hi.sup(p)),
            );
            let diag = (hi - lo).norm();
            let mean_err = corrs
                .iter()
                .map(|c| (project(&c.point3, &est, &cam_s).unwrap() - c.point2).norm())
                .sum::<f64>()
                / corrs.len() as f64;
            rel_errors.push(mean_err / diag);
            let tz_ratio = est.translation.z / pose.translation.z;
            assert!(
                (tz_ratio / s - 1.0).abs() < 0.05,
                "s={s} tz ratio {tz_ratio}"
            );
        }
        let med = median(rel_errors);
        assert!(
            med < 0.01,
            "s={s} median reprojection {med} of bbox diagonal"
        );
    }
}

#[test]
fn rotating_the_image_rotates_the_pose() {
    let mut rng = rng(5);
    let camera = PinholeCamera::new(900.0, 640, 480).unwrap();
    let pp = camera.principal_point;
    let rz = Rotation::from_axis_angle(&Vec3::z(), std::f64::consts::FRAC_PI_2);
    for _ in 0..20 {
        let pose = random_pose(&mut rng, 8.0);
        let points = random_points(&mut rng, 40, 1.0);
        let corrs = exact_set(&points, &pose, &camera);
        let rotated: Vec<Vec2> = corrs
            .iter()
            .map(|c| {
                let d = c.point2 - pp;
                pp + Vec2::new(-d.y, d.x)
            })
            .collect();
        let corrs_rot = CorrespondenceSet::from_pairs(&points, &rotated).unwrap();
        let a = solve_epnp(&corrs, &camera).unwrap();
        let b = solve_epnp(&corrs_rot, &camera).unwrap();
        let expected = RigidPose::new(rz, Vec3::zeros()).compose(&a);
        assert!(geodesic_distance(&b.rotation, &expected.rotation) < 1e-6);
        assert!((b.translation - expected.translation).norm() < 1e-6 * expected.translation.norm());
    }
}

#[test]
fn three_points_are_underdetermined() {
    let mut rng = rng(1);
    let camera = PinholeCamera::new(800.0, 640, 480).unwrap();
    let pose = random_pose(&mut rng, 5.0);
    let points = random_points(&mut rng, 3, 1.0);
    let corrs = exact_set(&points, &pose, &camera);
    assert_eq!(
        solve_epnp(&corrs, &camera),
        Err(Error::NotEnoughCorrespondences { needed: 4, got: 3 })
    );
}

#[test]
fn minimal_sets_are_exact() {
    let mut rng = rng(404);
    for n in [4, 5] {
        for case in 0..200 {
            let depth = rng.random_range(2.0..20.0);
            let f = rng.random_range(300.0..3000.0);
            let camera = PinholeCamera::new(f, 640, 480).unwrap();
            let pose = random_pose(&mut rng, depth);
            let points = random_points(&mut rng, n, 1.0);
            let est = solve_epnp(&exact_set(&points, &pose, &camera), &camera).unwrap();
            let e_r = geodesic_distance(&est.rotation, &pose.rotation);
            let e_t = rel_translation_error(&est.translation, &pose.translation);
            assert!(e_r < 1e-6 && e_t < 1e-6, "n {n} case {case}: {e_r} {e_t}");
        }
    }
}

#[test]
fn reweighting_resists_gross_outliers() {
    let mut rng = rng(405);
    let (mut plain, mut robust) = (Vec::new(), Vec::new());
    for _ in 0..100 {
        let depth = rng.random_range(4.0..12.0);
        let camera = PinholeCamera::new(rng.random_range(500.0..1500.0), 640, 480).unwrap();
        let pose = random_pose(&mut rng, depth);
        let points = random_points(&mut rng, 200, 0.5);
        let mut uv = exact_projections(&points, &pose, &camera);
        for p in uv.iter_mut() {
            *p += Vec2::new(gaussian(&mut rng), gaussian(&mut rng));
            if rng.random::<f64>() < 0.3 {
                *p = Vec2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            }
        }
        let corrs = CorrespondenceSet::from_pairs(&points, &uv).unwrap();
        let err = |p: &RigidPose| geodesic_distance(&p.rotation, &pose.rotation);
        plain.push(solve_epnp(&corrs, &camera).map_or(f64::INFINITY, |p| err(&p)));
        let loss = LossKind::Cauchy { scale: 5.0 };
        robust.push(solve_epnp_irls(&corrs, &camera, loss, 5).map_or(f64::INFINITY, |p| err(&p)));
    }
    let (plain, robust) = (median(plain), median(robust));
    assert!(robust < 0.2 * plain, "plain {plain} reweighted {robust}");
}

#[test]
fn reweighting_is_a_no_op_under_squared_loss() {
    let mut rng = rng(406);
    let camera = PinholeCamera::new(800.0, 640, 480).unwrap();
    let pose = random_pose(&mut rng, 6.0);
    let points = random_points(&mut rng, 30, 1.0);
    let corrs = exact_set(&points, &pose, &camera);
    assert_eq!(
        solve_epnp_irls(&corrs, &camera, LossKind::Squared, 5).unwrap(),
        solve_epnp(&corrs, &camera).unwrap()
    );
}
