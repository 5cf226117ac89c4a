//! Experiment configuration as read from JSON.

use std::path::{Path, PathBuf};

use pnpf_core::{
    CorrespondenceMode, FocalInit, FocalPredictorModel, NoiseSpec, PipelineConfig, PnpStrategy,
    RansacOptions, RefineMode, SceneSpec, SolverOptions,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Every field is optional in the file; missing fields take their defaults.
/// `scene_spec.rng_seed` and `ransac.rng_seed` are ignored: both streams are
/// derived from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene_spec: SceneSpec,
    pub noise_spec: NoiseSpec,
    pub predictor_model: FocalPredictorModel,
    pub correspondence_mode: CorrespondenceMode,
    pub pnp_strategy: PnpStrategy,
    pub focal_init: FocalInit,
    pub refine: RefineMode,
    pub n_scenes: usize,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub lf_grid: usize,
    pub cauchy_scale_px: f64,
    pub training_scenes: usize,
    pub solver: SolverOptions,
    pub ransac: RansacOptions,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::from_pipeline(&PipelineConfig::default(), None)
    }
}

impl ExperimentConfig {
    pub fn from_pipeline(p: &PipelineConfig, output_dir: Option<PathBuf>) -> Self {
        Self {
            scene_spec: p.scene_spec.clone(),
            noise_spec: p.noise_spec,
            predictor_model: p.predictor_model,
            correspondence_mode: p.correspondence_mode,
            pnp_strategy: p.pnp_strategy,
            focal_init: p.focal_init,
            refine: p.refine,
            n_scenes: p.n_scenes,
            seed: p.seed,
            output_dir,
            lf_grid: p.lf_grid,
            cauchy_scale_px: p.cauchy_scale_px,
            training_scenes: p.training_scenes,
            solver: p.solver,
            ransac: p.ransac,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            scene_spec: self.scene_spec.clone(),
            noise_spec: self.noise_spec,
            predictor_model: self.predictor_model,
            correspondence_mode: self.correspondence_mode,
            pnp_strategy: self.pnp_strategy,
            focal_init: self.focal_init,
            refine: self.refine,
            n_scenes: self.n_scenes,
            seed: self.seed,
            lf_grid: self.lf_grid,
            cauchy_scale_px: self.cauchy_scale_px,
            training_scenes: self.training_scenes,
            solver: self.solver,
            ransac: self.ransac,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}
