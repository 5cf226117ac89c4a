//! Experiment driver: runs scenes in parallel and writes the artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pnpf_core::metrics::default_curve_thresholds;
use pnpf_core::pipeline::{constant_focal, run_scene, solve_scene, synthesize, SceneOutcome};
use pnpf_core::{
    aggregate, evaluate, solve_correspondences, FocalInit, MetricsReport, PipelineConfig,
    PnpStrategy, RefineMode, SampleErrors,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::formats::{
    csv_err, curve_csv, read_json, to_json_bytes, CorrespondenceFile, SolutionFile, SolveResultJson,
};
use crate::manifest::{ArtifactWriter, CommandSpec, Manifest, MANIFEST_FILE};

pub const SCENES_CSV: &str = "scenes.csv";
pub const REPORT_JSON: &str = "report.json";
pub const CURVE_CSV: &str = "curve.csv";
pub const ABLATION_CSV: &str = "ablation.csv";

/// Thread pool with `jobs` workers; 0 picks the number of cores.
fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Experiment(e.to_string()))
}

fn validated(cfg: &ExperimentConfig) -> Result<PipelineConfig> {
    cfg.validate()?;
    Ok(cfg.pipeline())
}

/// One evaluated scene with the hash of its synthesized input.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneRow {
    pub index: u64,
    /// `None` when the scene could not be synthesized.
    pub hash: Option<String>,
    pub f_gt: f64,
    pub f_init: f64,
    pub f_est: f64,
    pub errors: SampleErrors,
    pub failure: Option<String>,
}

impl SceneRow {
    fn from_outcome(o: SceneOutcome, hash: Option<String>) -> Self {
        Self {
            index: o.index,
            hash,
            f_gt: o.scene.as_ref().map_or(f64::NAN, |s| s.camera_gt.focal_px),
            f_init: o.f_init,
            f_est: o.f_est,
            errors: o.errors,
            failure: o.failure,
        }
    }
}

/// Synthesizes, solves and evaluates every scene, ordered by index.
pub fn run_scenes(p: &PipelineConfig, jobs: usize) -> Result<Vec<SceneRow>> {
    let constant = match p.focal_init {
        FocalInit::Constant => Some(constant_focal(p)?),
        _ => None,
    };
    let rows = pool(jobs)?.install(|| {
        (0..p.n_scenes as u64)
            .into_par_iter()
            .map(|i| match synthesize(p, i) {
                Ok(input) => SceneRow::from_outcome(
                    solve_scene(p, i, &input, constant),
                    Some(CorrespondenceFile::from_input(&input).hash()),
                ),
                Err(_) => SceneRow::from_outcome(run_scene(p, i, constant), None),
            })
            .collect()
    });
    Ok(rows)
}

/// Aggregate metrics; too many failed scenes abort with a diagnostic.
pub fn report(rows: &[SceneRow]) -> Result<MetricsReport> {
    let errors: Vec<SampleErrors> = rows.iter().map(|r| r.errors).collect();
    aggregate(&errors).map_err(|e| {
        let reasons: Vec<String> = rows
            .iter()
            .filter_map(|r| {
                r.failure
                    .as_ref()
                    .map(|f| format!("scene {}: {f}", r.index))
            })
            .take(5)
            .collect();
        CliError::Experiment(format!("{e}; first failures: [{}]", reasons.join("; ")))
    })
}

fn fmt(v: f64) -> String {
    v.to_string()
}

pub fn scenes_csv(rows: &[SceneRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scene_id",
        "scene_hash",
        "status",
        "f_gt",
        "f_init",
        "f_est",
        "err_r",
        "err_t",
        "err_rt",
        "err_f",
        "err_p",
        "failure",
    ])
    .map_err(csv_err)?;
    for r in rows {
        let e = &r.errors;
        w.write_record([
            r.index.to_string(),
            r.hash.clone().unwrap_or_default(),
            if r.failure.is_some() { "failed" } else { "ok" }.to_string(),
            fmt(r.f_gt),
            fmt(r.f_init),
            fmt(r.f_est),
            fmt(e.rotation),
            fmt(e.translation),
            fmt(e.pose),
            fmt(e.focal),
            fmt(e.projection),
            r.failure.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Experiment(e.to_string()))
}

/// Writes the per-scene table, the report and the `Acc_{R,t}` curve under
/// `prefix` and returns the report.
fn write_results(
    writer: &mut ArtifactWriter,
    prefix: &str,
    rows: &[SceneRow],
) -> Result<MetricsReport> {
    let report = report(rows)?;
    let pose: Vec<f64> = rows.iter().map(|r| r.errors.pose).collect();
    writer.write(&format!("{prefix}{SCENES_CSV}"), &scenes_csv(rows)?)?;
    writer.write(&format!("{prefix}{REPORT_JSON}"), &to_json_bytes(&report))?;
    writer.write(
        &format!("{prefix}{CURVE_CSV}"),
        &curve_csv(&pose, &default_curve_thresholds())?,
    )?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub report: MetricsReport,
    pub rows: Vec<SceneRow>,
    pub manifest: Manifest,
}

/// Runs a full experiment and writes its artifacts and manifest to `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<ExperimentOutput> {
    let p = validated(cfg)?;
    let rows = run_scenes(&p, jobs)?;
    let mut writer = ArtifactWriter::create(out, Manifest::new(CommandSpec::Run, cfg))?;
    let report = write_results(&mut writer, "", &rows)?;
    Ok(ExperimentOutput {
        report,
        rows,
        manifest: writer.finish()?,
    })
}

/// The axis varied by an ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AblationKind {
    #[serde(rename = "PnPStrategies")]
    PnpStrategies,
    FocalInit,
    Refinement,
}

/// Configurations of every cell, named after the varied value.
pub fn ablation_cells(
    kind: AblationKind,
    base: &ExperimentConfig,
) -> Vec<(String, ExperimentConfig)> {
    let cell = |name: &str, cfg: ExperimentConfig| (name.to_string(), cfg);
    match kind {
        AblationKind::PnpStrategies => [
            ("Standard", PnpStrategy::Standard),
            ("RANSAC", PnpStrategy::Ransac),
            ("Cauchy", PnpStrategy::Cauchy),
        ]
        .into_iter()
        .map(|(n, s)| {
            cell(
                n,
                ExperimentConfig {
                    pnp_strategy: s,
                    ..base.clone()
                },
            )
        })
        .collect(),
        AblationKind::FocalInit => [
            ("GroundTruth", FocalInit::GroundTruth),
            ("Predicted", FocalInit::Predicted),
            ("Constant", FocalInit::Constant),
        ]
        .into_iter()
        .map(|(n, f)| {
            cell(
                n,
                ExperimentConfig {
                    focal_init: f,
                    ..base.clone()
                },
            )
        })
        .collect(),
        AblationKind::Refinement => [
            ("InitialOnly", RefineMode::InitialOnly),
            ("Joint", RefineMode::Joint),
            ("FixedFocal", RefineMode::FixedFocal),
        ]
        .into_iter()
        .map(|(n, r)| {
            cell(
                n,
                ExperimentConfig {
                    refine: r,
                    ..base.clone()
                },
            )
        })
        .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct AblationCell {
    pub name: String,
    pub report: MetricsReport,
    pub rows: Vec<SceneRow>,
}

#[derive(Debug, Clone)]
pub struct AblationOutput {
    pub cells: Vec<AblationCell>,
    pub manifest: Manifest,
}

impl AblationOutput {
    pub fn cell(&self, name: &str) -> Option<&AblationCell> {
        self.cells.iter().find(|c| c.name == name)
    }
}

pub fn ablation_csv(cells: &[AblationCell]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "cell",
        "med_err_r",
        "acc_r_pi6",
        "med_err_t",
        "med_err_rt",
        "med_err_f",
        "med_err_p",
        "acc_p_01",
        "sample_count",
    ])
    .map_err(csv_err)?;
    for c in cells {
        let r = &c.report;
        w.write_record([
            c.name.clone(),
            fmt(r.med_err_r),
            fmt(r.acc_r_pi6),
            fmt(r.med_err_t),
            fmt(r.med_err_rt),
            fmt(r.med_err_f),
            fmt(r.med_err_p),
            fmt(r.acc_p_01),
            r.sample_count.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| CliError::Experiment(e.to_string()))
}

/// Runs every cell of an ablation on the same scenes. Each cell's artifacts
/// go to `out/<cell>/`, the comparison table to `out/ablation.csv`.
pub fn run_ablation(
    kind: AblationKind,
    base: &ExperimentConfig,
    out: &Path,
    jobs: usize,
) -> Result<AblationOutput> {
    validated(base)?;
    let mut writer =
        ArtifactWriter::create(out, Manifest::new(CommandSpec::Ablate { kind }, base))?;
    let mut cells: Vec<AblationCell> = Vec::new();
    for (name, cfg) in ablation_cells(kind, base) {
        let rows = run_scenes(&validated(&cfg)?, jobs)?;
        if let Some(first) = cells.first() {
            let same = first
                .rows
                .iter()
                .map(|r| &r.hash)
                .eq(rows.iter().map(|r| &r.hash));
            if !same {
                return Err(CliError::Experiment(format!(
                    "cells {} and {name} saw different scenes",
                    first.name
                )));
            }
        }
        let report = write_results(&mut writer, &format!("{name}/"), &rows)?;
        cells.push(AblationCell { name, report, rows });
    }
    writer.write(ABLATION_CSV, &ablation_csv(&cells)?)?;
    Ok(AblationOutput {
        cells,
        manifest: writer.finish()?,
    })
}

pub fn scene_file_name(id: u64) -> String {
    format!("scene_{id:06}.json")
}

/// Writes one correspondence file per scene to `out/scenes/`.
pub fn generate(cfg: &ExperimentConfig, out: &Path, jobs: usize) -> Result<Manifest> {
    let p = validated(cfg)?;
    let files: Vec<Result<CorrespondenceFile>> = pool(jobs)?.install(|| {
        (0..p.n_scenes as u64)
            .into_par_iter()
            .map(|i| Ok(CorrespondenceFile::from_input(&synthesize(&p, i)?)))
            .collect()
    });
    let mut writer = ArtifactWriter::create(out, Manifest::new(CommandSpec::Generate, cfg))?;
    for f in files {
        let f = f?;
        writer.write(
            &format!("scenes/{}", scene_file_name(f.scene_id)),
            &to_json_bytes(&f),
        )?;
    }
    writer.finish()
}

/// JSON files of a directory sorted by name, the manifest excluded.
fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(CliError::io(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "json")
                && p.file_name().is_some_and(|n| n != MANIFEST_FILE)
        })
        .collect();
    files.sort();
    Ok(files)
}

/// Reads every JSON file of `dir`, recording checksums under `key/`.
fn read_inputs<T: serde::de::DeserializeOwned>(
    writer: &mut ArtifactWriter,
    key: &str,
    dir: &Path,
) -> Result<Vec<(String, T)>> {
    let mut out = Vec::new();
    for path in json_files(dir)? {
        let bytes = std::fs::read(&path).map_err(CliError::io(&path))?;
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        writer.record_input(format!("{key}/{name}"), &bytes);
        let value = serde_json::from_slice(&bytes).map_err(|source| CliError::Format {
            path: path.clone(),
            source,
        })?;
        out.push((name, value));
    }
    Ok(out)
}

fn absolute(path: &Path) -> Result<PathBuf> {
    std::fs::canonicalize(path).map_err(CliError::io(path))
}

/// Solves every correspondence file in `input`, writing `out/results/`.
pub fn solve(cfg: &ExperimentConfig, input: &Path, out: &Path, jobs: usize) -> Result<Manifest> {
    let p = validated(cfg)?;
    let input = absolute(input)?;
    let command = CommandSpec::Solve {
        input: input.clone(),
    };
    let mut writer = ArtifactWriter::create(out, Manifest::new(command, cfg))?;
    let files: Vec<(String, CorrespondenceFile)> = read_inputs(&mut writer, "input", &input)?;
    let constant = match p.focal_init {
        FocalInit::Constant => Some(constant_focal(&p)?),
        _ => None,
    };
    let solutions: Vec<Result<SolutionFile>> = pool(jobs)?.install(|| {
        files
            .par_iter()
            .map(|(_, f)| {
                let f_init = match p.focal_init {
                    FocalInit::GroundTruth => f.f_gt,
                    FocalInit::Predicted => f.f_pred,
                    FocalInit::Constant => constant.expect("computed above"),
                };
                let corrs = f.correspondence_set()?;
                let camera = f.camera()?;
                let settings = p.solve_settings(f.scene_id);
                let (result, failure) =
                    match solve_correspondences(&corrs, &camera, f_init, &settings) {
                        Ok(r) => (Some(SolveResultJson::from(&r)), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                Ok(SolutionFile {
                    scene_id: f.scene_id,
                    f_init,
                    result,
                    failure,
                })
            })
            .collect()
    });
    for ((name, _), s) in files.iter().zip(solutions) {
        writer.write(&format!("results/{name}"), &to_json_bytes(&s?))?;
    }
    writer.finish()
}

/// Evaluates solution files against correspondence files (matched by
/// `scene_id`); scenes without a usable solution count as failed.
pub fn eval(
    cfg: &ExperimentConfig,
    results: &Path,
    truth: &Path,
    out: &Path,
) -> Result<ExperimentOutput> {
    validated(cfg)?;
    let (results, truth) = (absolute(results)?, absolute(truth)?);
    let command = CommandSpec::Eval {
        input: results.clone(),
        truth: truth.clone(),
    };
    let mut writer = ArtifactWriter::create(out, Manifest::new(command, cfg))?;
    let truths: Vec<(String, CorrespondenceFile)> = read_inputs(&mut writer, "truth", &truth)?;
    let solutions: BTreeMap<u64, SolutionFile> =
        read_inputs::<SolutionFile>(&mut writer, "input", &results)?
            .into_iter()
            .map(|(_, s)| (s.scene_id, s))
            .collect();

    let mut truths: Vec<CorrespondenceFile> = truths.into_iter().map(|(_, t)| t).collect();
    truths.sort_by_key(|t| t.scene_id);
    let mut rows = Vec::with_capacity(truths.len());
    for t in &truths {
        let sol = solutions.get(&t.scene_id);
        let outcome = match sol {
            None => Err("no solution file".to_string()),
            Some(SolutionFile {
                failure: Some(f), ..
            }) => Err(f.clone()),
            Some(SolutionFile {
                result: Some(r), ..
            }) => r
                .pose
                .to_pose()
                .and_then(|pose| t.eval_sample(&pose, r.focal_px))
                .and_then(|s| Ok(evaluate(&s)?))
                .map(|e| (e, r.focal_px))
                .map_err(|e| e.to_string()),
            Some(_) => Err("solution without result".to_string()),
        };
        let (errors, f_est, failure) = match outcome {
            Ok((e, f)) => (e, f, None),
            Err(m) => (SampleErrors::failed(), f64::NAN, Some(m)),
        };
        rows.push(SceneRow {
            index: t.scene_id,
            hash: Some(t.hash()),
            f_gt: t.f_gt,
            f_init: sol.map_or(f64::NAN, |s| s.f_init),
            f_est,
            errors,
            failure,
        });
    }
    if rows.is_empty() {
        return Err(CliError::Experiment(format!(
            "no correspondence files in {}",
            truth.display()
        )));
    }
    let report = write_results(&mut writer, "", &rows)?;
    Ok(ExperimentOutput {
        report,
        rows,
        manifest: writer.finish()?,
    })
}

/// Re-executes the command recorded in a manifest into `out` and checks
/// that every artifact is byte-identical.
pub fn replay(manifest_path: &Path, out: &Path, jobs: usize) -> Result<Manifest> {
    let recorded = Manifest::load(manifest_path)?;
    let cfg = &recorded.config;
    if recorded.seed != cfg.seed {
        return Err(CliError::Config(
            "manifest seed disagrees with its config".into(),
        ));
    }
    let replayed = match &recorded.command {
        CommandSpec::Run => run_experiment(cfg, out, jobs)?.manifest,
        CommandSpec::Generate => generate(cfg, out, jobs)?,
        CommandSpec::Solve { input } => solve(cfg, input, out, jobs)?,
        CommandSpec::Eval { input, truth } => eval(cfg, input, truth, out)?.manifest,
        CommandSpec::Ablate { kind } => run_ablation(*kind, cfg, out, jobs)?.manifest,
    };
    let mut problems = Vec::new();
    for (key, sum) in &recorded.inputs {
        if replayed.inputs.get(key) != Some(sum) {
            problems.push(format!("input {key} changed"));
        }
    }
    for (key, sum) in &recorded.artifacts {
        match replayed.artifacts.get(key) {
            Some(s) if s == sum => {}
            Some(_) => problems.push(format!("{key} differs")),
            None => problems.push(format!("{key} missing")),
        }
    }
    for key in replayed.artifacts.keys() {
        if !recorded.artifacts.contains_key(key) {
            problems.push(format!("{key} unexpected"));
        }
    }
    if problems.is_empty() {
        Ok(replayed)
    } else {
        Err(CliError::Experiment(format!(
            "replay mismatch: {}",
            problems.join(", ")
        )))
    }
}

/// Reads a `report.json`.
pub fn load_report(path: &Path) -> Result<MetricsReport> {
    read_json(path)
}
