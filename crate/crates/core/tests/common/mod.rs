#![allow(dead_code)]

use pnpf_core::{project, CorrespondenceSet, PinholeCamera, RigidPose, Rotation, Vec2, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Rotation {
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    Rotation::from_axis_angle(&Vec3::from(axis), angle)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Points spread over a unit-ish volume around the origin.
pub fn random_points(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<Vec3> {
    (0..n)
        .map(|_| {
            Vec3::new(
                rng.random_range(-radius..radius),
                rng.random_range(-radius..radius),
                rng.random_range(-radius..radius),
            )
        })
        .collect()
}

/// Random pose placing the origin at `depth` in front of the camera.
pub fn random_pose(rng: &mut ChaCha8Rng, depth: f64) -> RigidPose {
    let r = random_rotation(rng);
    let t = Vec3::new(
        rng.random_range(-0.1..0.1) * depth,
        rng.random_range(-0.1..0.1) * depth,
        depth,
    );
    RigidPose::new(r, t)
}

pub fn exact_projections(points: &[Vec3], pose: &RigidPose, camera: &PinholeCamera) -> Vec<Vec2> {
    points
        .iter()
        .map(|p| project(p, pose, camera).unwrap())
        .collect()
}

pub fn exact_set(points: &[Vec3], pose: &RigidPose, camera: &PinholeCamera) -> CorrespondenceSet {
    CorrespondenceSet::from_pairs(points, &exact_projections(points, pose, camera)).unwrap()
}

pub fn rel_translation_error(a: &Vec3, b: &Vec3) -> f64 {
    (a - b).norm() / b.norm()
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
