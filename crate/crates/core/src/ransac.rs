//! Hypothesize-and-verify wrapper around EPnP and the joint refiner.

use alloc::vec::Vec;

use num_traits::Float;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::correspondence::{CorrespondenceSet, MIN_CORRESPONDENCES};
use crate::epnp::solve_epnp;
use crate::error::{Error, Result};
use crate::geometry::{project, PinholeCamera, RigidPose};
use crate::refine::{refine_joint, SolveResult, SolverOptions};

/// Rounds of refit-and-rescore after the consensus set is found.
const CONSENSUS_REFITS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RansacOptions {
    pub sample_size: usize,
    pub inlier_threshold_px: f64,
    pub max_iterations: usize,
    pub confidence: f64,
    pub rng_seed: u64,
}

impl Default for RansacOptions {
    fn default() -> Self {
        Self {
            sample_size: 4,
            inlier_threshold_px: 5.0,
            max_iterations: 256,
            confidence: 0.99,
            rng_seed: 0,
        }
    }
}

impl RansacOptions {
    pub fn validate(&self) -> Result<()> {
        if self.sample_size < MIN_CORRESPONDENCES {
            return Err(Error::InvalidOptions(
                "ransac sample_size must be at least 4",
            ));
        }
        if !(self.inlier_threshold_px > 0.0 && self.inlier_threshold_px.is_finite()) {
            return Err(Error::InvalidOptions("ransac threshold must be positive"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidOptions(
                "ransac confidence must lie in (0, 1)",
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidOptions("ransac needs at least one iteration"));
        }
        Ok(())
    }
}

/// Inlier count and summed inlier error of a hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Score {
    inliers: usize,
    error: f64,
}

impl Score {
    fn better_than(&self, other: &Score) -> bool {
        self.inliers > other.inliers || (self.inliers == other.inliers && self.error < other.error)
    }
}

fn score(
    corrs: &CorrespondenceSet,
    pose: &RigidPose,
    camera: &PinholeCamera,
    threshold: f64,
) -> (Score, Vec<bool>) {
    let mut mask = Vec::with_capacity(corrs.len());
    let mut s = Score {
        inliers: 0,
        error: 0.0,
    };
    for c in corrs {
        let inlier = match project(&c.point3, pose, camera) {
            Ok(uv) => {
                let e = (uv - c.point2).norm();
                if e < threshold {
                    s.error += e;
                    true
                } else {
                    false
                }
            }
            Err(_) => false,
        };
        s.inliers += usize::from(inlier);
        mask.push(inlier);
    }
    (s, mask)
}

/// Iterations needed to draw one all-inlier sample with the given confidence.
fn required_iterations(inlier_ratio: f64, sample_size: usize, confidence: f64) -> f64 {
    let all_inliers = Float::powi(inlier_ratio, sample_size as i32);
    if all_inliers >= 1.0 {
        return 0.0;
    }
    if all_inliers <= 0.0 {
        return f64::INFINITY;
    }
    Float::ln(1.0 - confidence) / Float::ln_1p(-all_inliers)
}

/// Seeded RANSAC over EPnP hypotheses at `camera.focal_px`, followed by joint
/// refinement on the consensus set.
pub fn solve_ransac(
    corrs: &CorrespondenceSet,
    camera: &PinholeCamera,
    opts: &RansacOptions,
    refine_opts: &SolverOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    refine_opts.validate()?;
    corrs.require(opts.sample_size)?;
    let n = corrs.len();
    let needed = opts.sample_size + 2;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.rng_seed);

    let mut best: Option<(Score, Vec<bool>)> = None;
    let mut budget = opts.max_iterations as f64;
    let mut iter = 0usize;
    while (iter as f64) < budget && iter < opts.max_iterations {
        iter += 1;
        let sample = rand::seq::index::sample(&mut rng, n, opts.sample_size).into_vec();
        let Ok(pose) = solve_epnp(&corrs.select(&sample), camera) else {
            continue;
        };
        let (s, mask) = score(corrs, &pose, camera, opts.inlier_threshold_px);
        if best.as_ref().is_none_or(|(b, _)| s.better_than(b)) {
            let ratio = s.inliers as f64 / n as f64;
            budget = required_iterations(ratio, opts.sample_size, opts.confidence)
                .min(opts.max_iterations as f64);
            best = Some((s, mask));
        }
    }

    let (best_score, mut mask) = best.ok_or(Error::NoConsensus { best: 0, needed })?;
    if best_score.inliers < needed {
        return Err(Error::NoConsensus {
            best: best_score.inliers,
            needed,
        });
    }

    let subset = corrs.subset(&mask);
    let init = solve_epnp(&subset, camera)?;
    let mut result = refine_joint(&subset, &init, camera.focal_px, camera, refine_opts)?;
    for _ in 0..CONSENSUS_REFITS {
        let refined_cam = camera.with_focal(result.focal_px);
        let (s, new_mask) = score(corrs, &result.pose, &refined_cam, opts.inlier_threshold_px);
        if new_mask == mask || s.inliers < needed {
            break;
        }
        mask = new_mask;
        result = refine_joint(
            &corrs.subset(&mask),
            &result.pose,
            result.focal_px,
            camera,
            refine_opts,
        )?;
    }
    result.inlier_mask = mask;
    Ok(result)
}
