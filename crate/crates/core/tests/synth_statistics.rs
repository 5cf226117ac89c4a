mod common;

use common::*;
use pnpf_core::synth::{purpose, stream_rng, CALIBRATED_LOG_SIGMA};
use pnpf_core::{
    generate_bb_correspondences, generate_lf_correspondences, project, sample_scene,
    simulate_focal_prediction, FocalPredictorModel, NoiseSpec, ObjectModel, SceneSpec, Vec3,
};

#[test]
fn median_focal_is_near_the_geometric_mean() {
    let spec = SceneSpec {
        rng_seed: 4,
        ..Default::default()
    };
    let focals: Vec<f64> = (0..1000)
        .map(|i| sample_scene(&spec, i).unwrap().camera_gt.focal_px)
        .collect();
    let m = median(focals);
    let geo = (300.0f64 * 3000.0).sqrt();
    assert!((m / geo - 1.0).abs() < 0.1, "median {m} vs {geo}");
}

#[test]
fn pixel_noise_has_the_requested_spread() {
    let spec = SceneSpec::default();
    let noise = NoiseSpec {
        pixel_sigma: 2.0,
        ..Default::default()
    };
    let mut dx = Vec::new();
    let mut dy = Vec::new();
    for i in 0..1250 {
        let scene = sample_scene(&spec, i).unwrap();
        let mut rng = stream_rng(0, i, purpose::CORRESPONDENCES);
        let (corrs, _) = generate_bb_correspondences(&scene, &noise, &mut rng).unwrap();
        for c in &corrs {
            let exact = project(&c.point3, &scene.pose_gt, &scene.camera_gt).unwrap();
            dx.push(c.point2.x - exact.x);
            dy.push(c.point2.y - exact.y);
        }
    }
    for d in [dx, dy] {
        assert_eq!(d.len(), 10_000);
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
        let std = var.sqrt();
        assert!((1.9..=2.1).contains(&std), "std {std}");
    }
}

#[test]
fn outlier_counts_follow_the_binomial_law() {
    let spec = SceneSpec::default();
    let scene = sample_scene(&spec, 0).unwrap();
    let noise = NoiseSpec {
        outlier_rate: 0.25,
        ..Default::default()
    };
    let exact: Vec<_> = scene
        .model_points
        .iter()
        .map(|p| project(p, &scene.pose_gt, &scene.camera_gt).unwrap())
        .collect();
    let trials = 10_000u64;
    let mut hist = [0u64; 9];
    for seed in 0..trials {
        let mut rng = stream_rng(seed, 0, purpose::CORRESPONDENCES);
        let (corrs, _) = generate_bb_correspondences(&scene, &noise, &mut rng).unwrap();
        let replaced = corrs
            .iter()
            .zip(&exact)
            .filter(|(c, e)| (c.point2 - **e).norm() > 1e-9)
            .count();
        hist[replaced] += 1;
    }
    // Pearson chi-square against Binomial(8, 0.25), tail k >= 6 pooled
    let pmf = |k: u32| {
        let c = (0..k).fold(1.0, |acc, i| acc * (8 - i) as f64 / (i + 1) as f64);
        c * 0.25f64.powi(k as i32) * 0.75f64.powi(8 - k as i32)
    };
    let mut chi2 = 0.0;
    for k in 0..6u32 {
        let e = trials as f64 * pmf(k);
        chi2 += (hist[k as usize] as f64 - e).powi(2) / e;
    }
    let e_tail = trials as f64 * (6..=8).map(pmf).sum::<f64>();
    let o_tail = hist[6..].iter().sum::<u64>() as f64;
    chi2 += (o_tail - e_tail).powi(2) / e_tail;
    // 99.9% quantile of chi-square with 6 degrees of freedom
    assert!(chi2 < 22.458, "chi2 {chi2}, histogram {hist:?}");
}

/// Ray/face test written independently of the generator's slab method.
fn hits_box(origin: &Vec3, dir: &Vec3, half: &Vec3) -> bool {
    for axis in 0..3 {
        if dir[axis] == 0.0 {
            continue;
        }
        for sign in [-1.0, 1.0] {
            let t = (sign * half[axis] - origin[axis]) / dir[axis];
            if t <= 0.0 {
                continue;
            }
            let p = origin + dir * t;
            let inside = (0..3)
                .filter(|&k| k != axis)
                .all(|k| p[k].abs() <= half[k] + 1e-12);
            if inside {
                return true;
            }
        }
    }
    false
}

#[test]
fn location_field_cell_count_matches_independent_ray_casting() {
    let spec = SceneSpec {
        rng_seed: 21,
        ..Default::default()
    };
    let ObjectModel::Box { dims } = spec.model.clone() else {
        unreachable!()
    };
    for i in 0..50 {
        let scene = sample_scene(&spec, i).unwrap();
        let mut rng = stream_rng(21, i, purpose::CORRESPONDENCES);
        let corrs =
            generate_lf_correspondences(&scene, 28, &NoiseSpec::default(), &mut rng).unwrap();
        assert!((200..=784).contains(&corrs.len()), "{} cells", corrs.len());

        let (lo, hi) = scene.bbox_2d();
        let cell = (hi - lo) / 28.0;
        let cam = &scene.camera_gt;
        let rt = scene.pose_gt.rotation.matrix().transpose();
        let origin = -(rt * scene.pose_gt.translation);
        let mut count = 0;
        for j in 0..28 {
            for k in 0..28 {
                let u = lo.x + (k as f64 + 0.5) * cell.x;
                let v = lo.y + (j as f64 + 0.5) * cell.y;
                let ray = Vec3::new(
                    (u - cam.principal_point.x) / cam.focal_px,
                    (v - cam.principal_point.y) / cam.focal_px,
                    1.0,
                );
                count += usize::from(hits_box(&origin, &(rt * ray), &(dims / 2.0)));
            }
        }
        assert_eq!(corrs.len(), count, "scene {i}");

        // zero noise: every pair reprojects within the quantization bound
        let bound = scene.bbox_diag_px / (28.0 * 2f64.sqrt());
        for c in &corrs {
            let uv = project(&c.point3, &scene.pose_gt, cam).unwrap();
            assert!((uv - c.point2).norm() <= bound);
        }
    }
}

fn predictor_median(log_sigma: f64) -> f64 {
    let model = FocalPredictorModel {
        log_sigma,
        bias: 0.0,
    };
    let mut rng = rng(99);
    let errs: Vec<f64> = (0..100_000)
        .map(|_| {
            (simulate_focal_prediction(1000.0, &model, &mut rng).unwrap() / 1000.0 - 1.0).abs()
        })
        .collect();
    median(errs)
}

#[test]
fn calibrated_predictor_hits_the_target_median() {
    let m = predictor_median(CALIBRATED_LOG_SIGMA);
    assert!((0.165..=0.185).contains(&m), "median {m}");
}

#[test]
fn predictor_at_sigma_024_matches_its_exact_median() {
    // solution of Phi(ln(1+m)/s) - Phi(ln(1-m)/s) = 1/2 for s = 0.24
    let m = predictor_median(0.24);
    assert!((m - 0.1607).abs() < 0.003, "median {m}");
}
