//! Command line, experiment harness and file formats for `pnpf-core`.
//!
//! Experiments are described by a JSON [`config::ExperimentConfig`]. Every
//! command writes its artifacts together with a `manifest.json` holding the
//! resolved configuration, the seed and SHA-256 checksums, from which the run
//! can be replayed and verified.

pub mod config;
pub mod error;
pub mod experiment;
pub mod formats;
pub mod manifest;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
pub use experiment::{
    ablation_cells, eval, generate, replay, run_ablation, run_experiment, solve, AblationKind,
    AblationOutput, ExperimentOutput, SceneRow,
};
pub use manifest::{CommandSpec, Manifest};
