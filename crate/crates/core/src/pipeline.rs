//! Per-scene experiment pipeline: synthesize, initialize, refine, evaluate.
//!
//! Everything here is a pure function of the configuration and the scene
//! index, so scenes can be processed in any order or in parallel.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::correspondence::CorrespondenceSet;
use crate::epnp::{solve_epnp, solve_epnp_irls};
use crate::error::{Error, Result};
use crate::geometry::{PinholeCamera, RigidPose};
use crate::loss::LossKind;
use crate::metrics::{evaluate, EvalSample, SampleErrors};
use crate::ransac::{solve_ransac, RansacOptions};
use crate::refine::{
    refine_joint, refine_pose_fixed_focal, residuals_and_cost, SolveResult, SolverOptions,
};
use crate::synth::{
    constant_focal_baseline, generate_bb_correspondences, generate_lf_correspondences, purpose,
    sample_scene, simulate_focal_prediction, stream_rng, FocalPredictorModel, GroundTruthScene,
    NoiseSpec, SceneSpec, DEFAULT_LF_GRID,
};

/// Reweighted EPnP rounds initializing the Cauchy strategy.
pub const IRLS_INIT_ROUNDS: usize = 5;

/// Salt separating the training split used by the constant focal baseline
/// from the evaluation scenes.
const TRAINING_SEED_SALT: u64 = 0x7472_6169_6e5f_7370;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum CorrespondenceMode {
    /// Dense location field.
    #[cfg_attr(feature = "serde", serde(rename = "LF"))]
    Lf,
    /// Eight bounding box corners.
    #[cfg_attr(feature = "serde", serde(rename = "BB"))]
    Bb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PnpStrategy {
    Standard,
    #[cfg_attr(feature = "serde", serde(rename = "RANSAC"))]
    Ransac,
    Cauchy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum FocalInit {
    GroundTruth,
    Predicted,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RefineMode {
    /// EPnP at the initial focal length, no refinement.
    InitialOnly,
    Joint,
    FixedFocal,
}

/// Everything that determines the outcome of one experiment.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PipelineConfig {
    /// `rng_seed` inside is replaced by `seed` when scenes are drawn.
    pub scene_spec: SceneSpec,
    pub noise_spec: NoiseSpec,
    pub predictor_model: FocalPredictorModel,
    pub correspondence_mode: CorrespondenceMode,
    pub pnp_strategy: PnpStrategy,
    pub focal_init: FocalInit,
    pub refine: RefineMode,
    pub n_scenes: usize,
    pub seed: u64,
    pub lf_grid: usize,
    /// Scale of the Cauchy loss used by the `Cauchy` strategy, pixels.
    pub cauchy_scale_px: f64,
    /// Size of the split the constant focal baseline is computed on.
    pub training_scenes: usize,
    pub solver: SolverOptions,
    /// `rng_seed` inside is derived per scene from `seed`.
    pub ransac: RansacOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            scene_spec: SceneSpec::default(),
            noise_spec: NoiseSpec::default(),
            predictor_model: FocalPredictorModel::default(),
            correspondence_mode: CorrespondenceMode::Lf,
            pnp_strategy: PnpStrategy::Standard,
            focal_init: FocalInit::Predicted,
            refine: RefineMode::Joint,
            n_scenes: 100,
            seed: 0,
            lf_grid: DEFAULT_LF_GRID,
            cauchy_scale_px: 1.0,
            training_scenes: 500,
            solver: SolverOptions::default(),
            ransac: RansacOptions::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_scenes == 0 {
            return Err(Error::InvalidArgument("n_scenes must be >= 1"));
        }
        if self.training_scenes == 0 {
            return Err(Error::InvalidArgument("training_scenes must be >= 1"));
        }
        if self.lf_grid < 4 {
            return Err(Error::InvalidArgument("location field grid must be >= 4"));
        }
        self.scene_spec.validate()?;
        self.noise_spec.validate()?;
        if !(self.predictor_model.log_sigma >= 0.0 && self.predictor_model.bias.is_finite()) {
            return Err(Error::InvalidArgument("predictor log_sigma must be >= 0"));
        }
        LossKind::Cauchy {
            scale: self.cauchy_scale_px,
        }
        .validate()?;
        self.solver.validate()?;
        self.ransac.validate()
    }

    /// Scene spec of the evaluation split.
    pub fn evaluation_spec(&self) -> SceneSpec {
        SceneSpec {
            rng_seed: self.seed,
            ..self.scene_spec.clone()
        }
    }

    /// Scene spec of the disjoint training split.
    pub fn training_spec(&self) -> SceneSpec {
        SceneSpec {
            rng_seed: self.seed ^ TRAINING_SEED_SALT,
            ..self.scene_spec.clone()
        }
    }

    /// Solving settings for scene `index`; the RANSAC seed is derived from
    /// the master seed and the index.
    pub fn solve_settings(&self, index: u64) -> SolveSettings {
        use rand::RngCore;
        SolveSettings {
            strategy: self.pnp_strategy,
            refine: self.refine,
            cauchy_scale_px: self.cauchy_scale_px,
            solver: self.solver,
            ransac: RansacOptions {
                rng_seed: stream_rng(self.seed, index, purpose::RANSAC).next_u64(),
                ..self.ransac
            },
        }
    }
}

/// Median ground-truth focal length over the training split.
pub fn constant_focal(cfg: &PipelineConfig) -> Result<f64> {
    let spec = cfg.training_spec();
    let scenes = (0..cfg.training_scenes as u64)
        .map(|i| sample_scene(&spec, i))
        .collect::<Result<Vec<_>>>()?;
    constant_focal_baseline(&scenes)
}

/// A synthesized scene with its correspondences and predicted focal length.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneInput {
    pub scene: GroundTruthScene,
    pub correspondences: CorrespondenceSet,
    pub f_pred: f64,
}

pub fn synthesize(cfg: &PipelineConfig, index: u64) -> Result<SceneInput> {
    let scene = sample_scene(&cfg.evaluation_spec(), index)?;
    let mut rng = stream_rng(cfg.seed, index, purpose::CORRESPONDENCES);
    let correspondences = match cfg.correspondence_mode {
        CorrespondenceMode::Bb => generate_bb_correspondences(&scene, &cfg.noise_spec, &mut rng)?.0,
        CorrespondenceMode::Lf => {
            generate_lf_correspondences(&scene, cfg.lf_grid, &cfg.noise_spec, &mut rng)?
        }
    };
    let mut rng = stream_rng(cfg.seed, index, purpose::FOCAL_PREDICTION);
    let f_pred =
        simulate_focal_prediction(scene.camera_gt.focal_px, &cfg.predictor_model, &mut rng)?;
    Ok(SceneInput {
        scene,
        correspondences,
        f_pred,
    })
}

/// Strategy and refinement settings of the solving stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    pub strategy: PnpStrategy,
    pub refine: RefineMode,
    pub cauchy_scale_px: f64,
    pub solver: SolverOptions,
    pub ransac: RansacOptions,
}

/// Estimates pose and focal length from correspondences, starting at `f_init`.
///
/// With [`RefineMode::InitialOnly`] the EPnP pose is returned as is, with zero
/// iterations and `converged` unset. The inlier mask always refers to `corrs`.
pub fn solve_correspondences(
    corrs: &CorrespondenceSet,
    camera_geom: &PinholeCamera,
    f_init: f64,
    settings: &SolveSettings,
) -> Result<SolveResult> {
    let camera = camera_geom.with_focal(f_init);
    let solver = match settings.strategy {
        PnpStrategy::Cauchy => settings.solver.with_loss(LossKind::Cauchy {
            scale: settings.cauchy_scale_px,
        }),
        _ => settings.solver,
    };

    let (subset, mask, init) = match settings.strategy {
        PnpStrategy::Ransac => {
            let consensus = solve_ransac(corrs, &camera, &settings.ransac, &solver)?;
            if settings.refine == RefineMode::Joint {
                return Ok(consensus);
            }
            let subset = corrs.subset(&consensus.inlier_mask);
            let init = solve_epnp(&subset, &camera)?;
            (subset, consensus.inlier_mask, init)
        }
        // a plain EPnP start on contaminated data often lies outside the
        // basin of the robust optimum
        PnpStrategy::Cauchy => (
            corrs.clone(),
            vec![true; corrs.len()],
            solve_epnp_irls(corrs, &camera, solver.loss, IRLS_INIT_ROUNDS)?,
        ),
        PnpStrategy::Standard => (
            corrs.clone(),
            vec![true; corrs.len()],
            solve_epnp(corrs, &camera)?,
        ),
    };

    let mut result = match settings.refine {
        RefineMode::InitialOnly => {
            let (_, cost) = residuals_and_cost(&subset, &init, f_init, camera_geom, solver.loss)?;
            SolveResult {
                pose: init,
                focal_px: f_init,
                final_cost: cost,
                initial_cost: cost,
                iterations: 0,
                converged: false,
                inlier_mask: Vec::new(),
                per_iteration_cost: vec![cost],
            }
        }
        RefineMode::Joint => refine_joint(&subset, &init, f_init, camera_geom, &solver)?,
        RefineMode::FixedFocal => {
            refine_pose_fixed_focal(&subset, &init, f_init, camera_geom, &solver)?
        }
    };
    result.inlier_mask = mask;
    Ok(result)
}

/// Result of one scene. Failed scenes carry infinite errors.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneOutcome {
    pub index: u64,
    pub scene: Option<GroundTruthScene>,
    pub f_init: f64,
    pub pose_pred: Option<RigidPose>,
    pub f_est: f64,
    pub errors: SampleErrors,
    pub failure: Option<String>,
}

impl SceneOutcome {
    fn failed(index: u64, scene: Option<GroundTruthScene>, f_init: f64, err: &Error) -> Self {
        Self {
            index,
            scene,
            f_init,
            pose_pred: None,
            f_est: f64::NAN,
            errors: SampleErrors::failed(),
            failure: Some(err.to_string()),
        }
    }
}

/// Builds the evaluation record of an estimate against its scene.
pub fn eval_sample(scene: &GroundTruthScene, pose_pred: &RigidPose, f_pred: f64) -> EvalSample {
    EvalSample {
        model_points: scene.model_points.clone(),
        pose_gt: scene.pose_gt,
        pose_pred: *pose_pred,
        f_gt: scene.camera_gt.focal_px,
        f_pred,
        principal_point: scene.camera_gt.principal_point,
        image_size: (scene.camera_gt.width, scene.camera_gt.height),
        bbox_diag_px: scene.bbox_diag_px,
        image_diag_px: scene.image_diag_px,
    }
}

/// Runs scene `index`. `constant_f` is required for [`FocalInit::Constant`].
pub fn run_scene(cfg: &PipelineConfig, index: u64, constant_f: Option<f64>) -> SceneOutcome {
    match synthesize(cfg, index) {
        Ok(input) => solve_scene(cfg, index, &input, constant_f),
        Err(e) => SceneOutcome::failed(index, None, f64::NAN, &e),
    }
}

/// Solves and evaluates an already synthesized scene.
pub fn solve_scene(
    cfg: &PipelineConfig,
    index: u64,
    input: &SceneInput,
    constant_f: Option<f64>,
) -> SceneOutcome {
    let scene = &input.scene;
    let f_init = match cfg.focal_init {
        FocalInit::GroundTruth => scene.camera_gt.focal_px,
        FocalInit::Predicted => input.f_pred,
        FocalInit::Constant => match constant_f {
            Some(f) => f,
            None => {
                let e = Error::InvalidArgument("constant focal length not provided");
                return SceneOutcome::failed(index, Some(scene.clone()), f64::NAN, &e);
            }
        },
    };
    let settings = cfg.solve_settings(index);
    let solved = solve_correspondences(&input.correspondences, &scene.camera_gt, f_init, &settings)
        .and_then(|r| {
            evaluate(&eval_sample(scene, &r.pose, r.focal_px)).map(|e| (r.pose, r.focal_px, e))
        });
    match solved {
        Ok((pose, f_est, errors)) => SceneOutcome {
            index,
            scene: Some(scene.clone()),
            f_init,
            pose_pred: Some(pose),
            f_est,
            errors,
            failure: None,
        },
        Err(e) => SceneOutcome::failed(index, Some(scene.clone()), f_init, &e),
    }
}

/// Runs every scene sequentially, in index order.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<Vec<SceneOutcome>> {
    cfg.validate()?;
    let constant_f = match cfg.focal_init {
        FocalInit::Constant => Some(constant_focal(cfg)?),
        _ => None,
    };
    Ok((0..cfg.n_scenes as u64)
        .map(|i| run_scene(cfg, i, constant_f))
        .collect())
}
