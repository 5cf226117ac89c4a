//! Run manifests: resolved configuration, seed and artifact checksums.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiment::AblationKind;
use crate::formats::{sha256_hex, to_json_bytes};

pub const MANIFEST_FILE: &str = "manifest.json";

/// The command that produced a set of artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum CommandSpec {
    Run,
    Generate,
    Solve { input: PathBuf },
    Eval { input: PathBuf, truth: PathBuf },
    Ablate { kind: AblationKind },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: CommandSpec,
    pub seed: u64,
    /// Resolved configuration; `output_dir` is left out since it does not
    /// influence any artifact.
    pub config: ExperimentConfig,
    /// SHA-256 of every input file, keyed by `input/...` or `truth/...`.
    pub inputs: BTreeMap<String, String>,
    /// SHA-256 of every artifact, keyed by path relative to the output root.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: CommandSpec, config: &ExperimentConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            seed: config.seed,
            config: ExperimentConfig {
                output_dir: None,
                ..config.clone()
            },
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        crate::formats::read_json(path)
    }
}

/// Writes artifacts under a root directory and records their checksums.
pub struct ArtifactWriter {
    root: PathBuf,
    manifest: Manifest,
}

impl ArtifactWriter {
    pub fn create(root: &Path, manifest: Manifest) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(CliError::io(root))?;
        Ok(Self {
            root: root.to_path_buf(),
            manifest,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn record_input(&mut self, key: String, bytes: &[u8]) {
        self.manifest.inputs.insert(key, sha256_hex(bytes));
    }

    /// `rel` uses `/` separators.
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
        }
        std::fs::write(&path, bytes).map_err(CliError::io(&path))?;
        self.manifest
            .artifacts
            .insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn finish(self) -> Result<Manifest> {
        let path = self.root.join(MANIFEST_FILE);
        std::fs::write(&path, to_json_bytes(&self.manifest)).map_err(CliError::io(&path))?;
        Ok(self.manifest)
    }
}
