mod common;

use common::*;
use pnpf_core::{
    geodesic_distance, project, refine_joint, solve_epnp, solve_ransac, CorrespondenceSet,
    PinholeCamera, RansacOptions, SolverOptions, Vec2,
};
use rand::Rng;

/// 100 correspondences, the first 30 replaced by uniform image positions.
fn contaminated(
    seed: u64,
) -> (
    CorrespondenceSet,
    PinholeCamera,
    pnpf_core::RigidPose,
    Vec<bool>,
) {
    let mut rng = rng(seed);
    let camera = PinholeCamera::new(900.0, 640, 480).unwrap();
    let pose = random_pose(&mut rng, 6.0);
    let points = random_points(&mut rng, 100, 1.0);
    let mut truth = vec![true; 100];
    let uv: Vec<Vec2> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let exact = project(p, &pose, &camera).unwrap();
            if i < 30 {
                truth[i] = false;
                Vec2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0))
            } else {
                exact + Vec2::new(0.5 * gaussian(&mut rng), 0.5 * gaussian(&mut rng))
            }
        })
        .collect();
    (
        CorrespondenceSet::from_pairs(&points, &uv).unwrap(),
        camera,
        pose,
        truth,
    )
}

#[test]
fn recovers_inliers_among_gross_outliers() {
    let (corrs, camera, pose, truth) = contaminated(42);
    let opts = RansacOptions {
        rng_seed: 42,
        ..Default::default()
    };
    let r = solve_ransac(&corrs, &camera, &opts, &SolverOptions::default()).unwrap();
    let true_in = r
        .inlier_mask
        .iter()
        .zip(&truth)
        .filter(|(m, t)| **m && **t)
        .count();
    let false_in = r
        .inlier_mask
        .iter()
        .zip(&truth)
        .filter(|(m, t)| **m && !**t)
        .count();
    assert!(true_in as f64 >= 0.95 * 70.0, "recovered {true_in} of 70");
    assert!(false_in <= 2, "{false_in} false inliers");
    assert!(geodesic_distance(&r.pose.rotation, &pose.rotation) < 0.01);
}

#[test]
fn identical_seed_gives_identical_result() {
    let (corrs, camera, _, _) = contaminated(3);
    let opts = RansacOptions {
        rng_seed: 1234,
        ..Default::default()
    };
    let a = solve_ransac(&corrs, &camera, &opts, &SolverOptions::default()).unwrap();
    let b = solve_ransac(&corrs, &camera, &opts, &SolverOptions::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn clean_data_reduces_to_joint_refinement() {
    let mut rng = rng(17);
    for _ in 0..10 {
        let camera = PinholeCamera::new(rng.random_range(500.0..1500.0), 640, 480).unwrap();
        let pose = random_pose(&mut rng, 7.0);
        let points = random_points(&mut rng, 50, 1.0);
        let corrs = exact_set(&points, &pose, &camera);
        let start = camera.with_focal(camera.focal_px * 1.1);
        let opts = SolverOptions::default();
        let r = solve_ransac(&corrs, &start, &RansacOptions::default(), &opts).unwrap();
        assert!(r.inlier_mask.iter().all(|&m| m));
        let init = solve_epnp(&corrs, &start).unwrap();
        let j = refine_joint(&corrs, &init, start.focal_px, &start, &opts).unwrap();
        assert!(geodesic_distance(&r.pose.rotation, &j.pose.rotation) < 1e-9);
        assert!((r.pose.translation - j.pose.translation).norm() < 1e-9);
        assert!((r.focal_px - j.focal_px).abs() < 1e-9 * j.focal_px);
    }
}
