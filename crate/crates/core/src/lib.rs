//! Pose and focal length estimation from 2D-3D correspondences.
//!
//! The crate is `no_std` (it needs `alloc`). It covers the full geometric
//! pipeline: EPnP initialization, joint Levenberg-Marquardt refinement of
//! rotation, translation and focal length under squared or Cauchy loss,
//! RANSAC, a seeded synthetic correspondence generator and the evaluation
//! metrics used to compare estimates against ground truth.

#![no_std]
// `!(x > 0.0)` is used deliberately so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod correspondence;
pub mod epnp;
pub mod error;
pub mod geometry;
pub mod loss;
pub mod metrics;
pub mod p3p;
pub mod pipeline;
pub mod ransac;
pub mod refine;
pub mod synth;

pub use correspondence::{Correspondence, CorrespondenceSet, MIN_CORRESPONDENCES};
pub use epnp::{select_control_points, solve_epnp, solve_epnp_irls, ControlPointBasis};
pub use error::{Error, Result};
pub use geometry::{
    exp_focal, geodesic_distance, log_focal, project, projection_jacobian, transform_point,
    PinholeCamera, RigidPose, Rotation, Vec2, Vec3,
};
pub use loss::{loss_value_and_weight, LossKind};
pub use metrics::{
    accuracy_curve, aggregate, evaluate, focal_error, pose_error, projection_error, rotation_error,
    translation_error, EvalSample, MetricsReport, SampleErrors,
};
pub use p3p::solve_p3p;
pub use pipeline::{
    run_pipeline, run_scene, solve_correspondences, CorrespondenceMode, FocalInit, PipelineConfig,
    PnpStrategy, RefineMode, SceneOutcome, SolveSettings,
};
pub use ransac::{solve_ransac, RansacOptions};
pub use refine::{
    refine, refine_joint, refine_multi_object, refine_pose_fixed_focal, residuals_and_cost,
    MultiObjectResult, SolveResult, SolverOptions,
};
pub use synth::{
    constant_focal_baseline, generate_bb_correspondences, generate_lf_correspondences,
    sample_scene, simulate_focal_prediction, FocalPredictorModel, GroundTruthScene, NoiseSpec,
    ObjectModel, RotationDistribution, SceneSpec,
};
