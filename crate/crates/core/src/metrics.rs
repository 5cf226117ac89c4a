//! Pose, focal length and projection error metrics and their aggregation.
//!
//! Accuracy thresholds are strict: a sample counts as correct only when its
//! error is below the threshold. Medians of even-length lists average the two
//! central values.

use alloc::vec::Vec;

use core::f64::consts::FRAC_PI_6;

use crate::error::{Error, Result};
use crate::geometry::{
    geodesic_distance, project_camera_point, transform_point, RigidPose, Vec2, Vec3,
};

/// Rotation accuracy threshold (30 degrees).
pub const ROTATION_ACC_THRESHOLD: f64 = FRAC_PI_6;
/// Projection accuracy threshold, as a fraction of the bbox diagonal.
pub const PROJECTION_ACC_THRESHOLD: f64 = 0.1;

/// Ground truth and prediction for one object.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    pub model_points: Vec<Vec3>,
    pub pose_gt: RigidPose,
    pub pose_pred: RigidPose,
    pub f_gt: f64,
    pub f_pred: f64,
    pub principal_point: Vec2,
    pub image_size: (u32, u32),
    pub bbox_diag_px: f64,
    pub image_diag_px: f64,
}

impl EvalSample {
    fn t_gt_norm(&self) -> Result<f64> {
        let n = self.pose_gt.translation.norm();
        if n > 0.0 {
            Ok(n)
        } else {
            Err(Error::DegenerateGroundTruth(
                "ground truth translation is zero",
            ))
        }
    }

    fn require_model(&self) -> Result<()> {
        if self.model_points.is_empty() {
            Err(Error::DegenerateGroundTruth("model has no points"))
        } else {
            Ok(())
        }
    }
}

/// Geodesic rotation error in radians.
pub fn rotation_error(sample: &EvalSample) -> f64 {
    geodesic_distance(&sample.pose_gt.rotation, &sample.pose_pred.rotation)
}

/// `|t_gt - t_pred| / |t_gt|`.
pub fn translation_error(sample: &EvalSample) -> Result<f64> {
    let n = sample.t_gt_norm()?;
    Ok((sample.pose_gt.translation - sample.pose_pred.translation).norm() / n)
}

/// Mean 3D distance of the model points under both poses, normalized by the
/// ground-truth distance and scaled by the relative object size in the image.
pub fn pose_error(sample: &EvalSample) -> Result<f64> {
    sample.require_model()?;
    let n = sample.t_gt_norm()?;
    if !(sample.bbox_diag_px > 0.0 && sample.image_diag_px > 0.0) {
        return Err(Error::DegenerateGroundTruth("diagonals must be positive"));
    }
    let sum: f64 = sample
        .model_points
        .iter()
        .map(|x| {
            (transform_point(&sample.pose_gt, x) - transform_point(&sample.pose_pred, x)).norm()
        })
        .sum();
    let mean = sum / sample.model_points.len() as f64;
    Ok(sample.bbox_diag_px / sample.image_diag_px * mean / n)
}

/// `|f_gt - f_pred| / f_gt`.
pub fn focal_error(sample: &EvalSample) -> Result<f64> {
    if !(sample.f_gt > 0.0) {
        return Err(Error::DegenerateGroundTruth(
            "ground truth focal must be positive",
        ));
    }
    Ok((sample.f_gt - sample.f_pred).abs() / sample.f_gt)
}

/// Mean 2D distance of the model points projected with the ground truth and
/// predicted parameters, normalized by the bbox diagonal.
pub fn projection_error(sample: &EvalSample) -> Result<f64> {
    sample.require_model()?;
    if !(sample.bbox_diag_px > 0.0) {
        return Err(Error::DegenerateGroundTruth(
            "bbox diagonal must be positive",
        ));
    }
    let pp = &sample.principal_point;
    let mut sum = 0.0;
    for x in &sample.model_points {
        let gt = project_camera_point(&transform_point(&sample.pose_gt, x), sample.f_gt, pp)?;
        let pred = project_camera_point(&transform_point(&sample.pose_pred, x), sample.f_pred, pp)?;
        sum += (gt - pred).norm();
    }
    Ok(sum / sample.model_points.len() as f64 / sample.bbox_diag_px)
}

/// All per-sample errors. Failed samples carry `+inf` everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleErrors {
    pub rotation: f64,
    pub translation: f64,
    pub pose: f64,
    pub focal: f64,
    pub projection: f64,
}

impl SampleErrors {
    pub fn failed() -> Self {
        Self {
            rotation: f64::INFINITY,
            translation: f64::INFINITY,
            pose: f64::INFINITY,
            focal: f64::INFINITY,
            projection: f64::INFINITY,
        }
    }

    pub fn is_failed(&self) -> bool {
        self.rotation.is_infinite()
    }
}

/// Evaluates every metric on one sample.
pub fn evaluate(sample: &EvalSample) -> Result<SampleErrors> {
    Ok(SampleErrors {
        rotation: rotation_error(sample),
        translation: translation_error(sample)?,
        pose: pose_error(sample)?,
        focal: focal_error(sample)?,
        projection: projection_error(sample)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub med_err_r: f64,
    pub acc_r_pi6: f64,
    pub med_err_t: f64,
    pub med_err_rt: f64,
    pub med_err_f: f64,
    pub med_err_p: f64,
    pub acc_p_01: f64,
    pub sample_count: usize,
}

/// Median; even counts average the two central values.
pub fn median(values: &mut [f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Ok(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

fn fraction_below(values: &[f64], threshold: f64) -> f64 {
    values.iter().filter(|v| **v < threshold).count() as f64 / values.len() as f64
}

/// Aggregates per-sample errors. Failed samples count against the accuracy
/// fractions; if they would make a median infinite the aggregation fails.
pub fn aggregate(errors: &[SampleErrors]) -> Result<MetricsReport> {
    if errors.is_empty() {
        return Err(Error::EmptyInput);
    }
    let column = |f: fn(&SampleErrors) -> f64| errors.iter().map(f).collect::<Vec<f64>>();
    let mut rot = column(|e| e.rotation);
    let mut trans = column(|e| e.translation);
    let mut pose = column(|e| e.pose);
    let mut focal = column(|e| e.focal);
    let mut proj = column(|e| e.projection);
    let acc_r = fraction_below(&rot, ROTATION_ACC_THRESHOLD);
    let acc_p = fraction_below(&proj, PROJECTION_ACC_THRESHOLD);
    let report = MetricsReport {
        med_err_r: median(&mut rot)?,
        acc_r_pi6: acc_r,
        med_err_t: median(&mut trans)?,
        med_err_rt: median(&mut pose)?,
        med_err_f: median(&mut focal)?,
        med_err_p: median(&mut proj)?,
        acc_p_01: acc_p,
        sample_count: errors.len(),
    };
    let medians = [
        report.med_err_r,
        report.med_err_t,
        report.med_err_rt,
        report.med_err_f,
        report.med_err_p,
    ];
    if medians.iter().any(|m| !m.is_finite()) {
        return Err(Error::TooManyFailures {
            failed: errors.iter().filter(|e| e.is_failed()).count(),
            total: errors.len(),
        });
    }
    Ok(report)
}

/// Fraction of errors strictly below each threshold.
pub fn accuracy_curve(errors: &[f64], thresholds: &[f64]) -> Result<Vec<(f64, f64)>> {
    if errors.is_empty() {
        return Err(Error::EmptyInput);
    }
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::UnsortedThresholds);
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| (t, sorted.partition_point(|e| *e < t) as f64 / n))
        .collect())
}

/// Threshold grid `0, 0.05, ..., 1.0`.
pub fn default_curve_thresholds() -> Vec<f64> {
    // i / 20 rounds to the nearest double of each decimal grid value
    (0..=20).map(|i| f64::from(i) / 20.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Rotation;
    use approx::assert_relative_eq;

    fn sample() -> EvalSample {
        let pose = RigidPose::new(
            Rotation::exp(&Vec3::new(0.1, 0.2, 0.3)),
            Vec3::new(0.0, 0.0, 5.0),
        );
        EvalSample {
            model_points: crate::synth::box_corners(&Vec3::zeros(), &Vec3::new(1.0, 1.0, 1.0))
                .to_vec(),
            pose_gt: pose,
            pose_pred: pose,
            f_gt: 1000.0,
            f_pred: 1000.0,
            principal_point: Vec2::new(320.0, 240.0),
            image_size: (640, 480),
            bbox_diag_px: 400.0,
            image_diag_px: 800.0,
        }
    }

    #[test]
    fn perfect_prediction_is_zero_everywhere() {
        let e = evaluate(&sample()).unwrap();
        assert_eq!(e.rotation, 0.0);
        assert_eq!(e.translation, 0.0);
        assert_eq!(e.pose, 0.0);
        assert_eq!(e.focal, 0.0);
        assert_eq!(e.projection, 0.0);
    }

    #[test]
    fn translation_examples() {
        let mut s = sample();
        s.pose_pred.translation = Vec3::new(0.0, 0.0, 5.5);
        assert_relative_eq!(translation_error(&s).unwrap(), 0.1, epsilon = 1e-12);
        s.pose_gt.translation = Vec3::new(3.0, 4.0, 0.0);
        s.pose_pred.translation = Vec3::zeros();
        assert_relative_eq!(translation_error(&s).unwrap(), 1.0, epsilon = 1e-12);
        s.pose_gt.translation = Vec3::zeros();
        assert!(matches!(
            translation_error(&s),
            Err(Error::DegenerateGroundTruth(_))
        ));
    }

    #[test]
    fn pose_error_uniform_offset() {
        let mut s = sample();
        s.pose_pred.translation += Vec3::new(0.0, 0.0, 0.2);
        assert_relative_eq!(pose_error(&s).unwrap(), 0.02, epsilon = 1e-12);
    }

    #[test]
    fn focal_examples() {
        let mut s = sample();
        s.f_pred = 900.0;
        assert_relative_eq!(focal_error(&s).unwrap(), 0.1, epsilon = 1e-12);
        s.f_pred = 1175.0;
        assert_relative_eq!(focal_error(&s).unwrap(), 0.175, epsilon = 1e-12);
    }

    #[test]
    fn uniform_image_shift_hits_threshold() {
        // shifting t_pred by dx*Z/f moves every projection by dx only when
        // all points share one depth, so use a planar model facing the camera
        let mut s = sample();
        s.pose_gt.rotation = Rotation::identity();
        s.model_points = alloc::vec![
            Vec3::new(-0.5, -0.5, 0.0),
            Vec3::new(0.5, -0.5, 0.0),
            Vec3::new(0.5, 0.5, 0.0),
            Vec3::new(-0.5, 0.5, 0.0),
        ];
        s.pose_pred = s.pose_gt;
        let shift_px = 0.1 * s.bbox_diag_px;
        s.pose_pred.translation.x += shift_px * s.pose_gt.translation.z / s.f_gt;
        assert_relative_eq!(projection_error(&s).unwrap(), 0.1, epsilon = 1e-12);
        let e = evaluate(&s).unwrap();
        let report = aggregate(&[e]).unwrap();
        // boundary sample is not below the threshold
        assert_eq!(report.acc_p_01, 0.0);
    }

    #[test]
    fn aggregate_examples() {
        let base = evaluate(&sample()).unwrap();
        let one = aggregate(&[base]).unwrap();
        assert_eq!(one.med_err_p, 0.0);
        assert_eq!(one.sample_count, 1);

        let errs: Vec<SampleErrors> = [0.05, 0.09, 0.11, 0.2]
            .iter()
            .map(|p| SampleErrors {
                projection: *p,
                ..base
            })
            .collect();
        let r = aggregate(&errs).unwrap();
        assert_relative_eq!(r.acc_p_01, 0.5);
        assert_relative_eq!(r.med_err_p, 0.10, epsilon = 1e-15);
        assert_eq!(aggregate(&[]), Err(Error::EmptyInput));
    }

    #[test]
    fn mostly_failed_runs_abort() {
        let ok = evaluate(&sample()).unwrap();
        let errs = [ok, SampleErrors::failed(), SampleErrors::failed()];
        assert_eq!(
            aggregate(&errs),
            Err(Error::TooManyFailures {
                failed: 2,
                total: 3
            })
        );
        // one failure in three still has a finite median and lowers accuracy
        let errs = [ok, ok, SampleErrors::failed()];
        let r = aggregate(&errs).unwrap();
        assert_relative_eq!(r.acc_r_pi6, 2.0 / 3.0);
    }

    #[test]
    fn curve_examples() {
        let c = accuracy_curve(&[0.3, 0.3], &[0.1, 0.5]).unwrap();
        assert_eq!(c, alloc::vec![(0.1, 0.0), (0.5, 1.0)]);
        assert_eq!(
            accuracy_curve(&[0.3], &[0.5, 0.1]),
            Err(Error::UnsortedThresholds)
        );
        let c = accuracy_curve(&[0.2, 0.01], &[0.0, f64::INFINITY]).unwrap();
        assert_eq!(c[0].1, 0.0);
        assert_eq!(c[1].1, 1.0);
        assert_eq!(default_curve_thresholds().len(), 21);
    }
}
