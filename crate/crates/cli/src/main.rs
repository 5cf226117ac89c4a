use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pnpf_cli::formats::to_json_bytes;
use pnpf_cli::{AblationKind, ExperimentConfig, Result};

const DEFAULT_OUT: &str = "pnpf-out";

/// Pose and focal length estimation experiments on synthetic scenes.
#[derive(Parser)]
#[command(name = "pnpf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output_dir` of the config [default: pnpf-out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    #[value(name = "pnp-strategies", alias = "PnPStrategies")]
    PnpStrategies,
    #[value(name = "focal-init", alias = "FocalInit")]
    FocalInit,
    #[value(name = "refinement", alias = "Refinement")]
    Refinement,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize scenes, solve and evaluate in one pass.
    Run(Common),
    /// Write one correspondence file per scene to <out>/scenes.
    Generate(Common),
    /// Solve correspondence files, writing <out>/results.
    Solve {
        /// Directory of correspondence files.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate solution files against their correspondence files.
    Eval {
        /// Directory of solution files.
        #[arg(long)]
        input: PathBuf,
        /// Directory of correspondence files holding the ground truth.
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every cell of an ablation on paired scenes.
    Ablate {
        kind: Kind,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run a manifest and verify that all artifacts are byte-identical.
    Replay {
        manifest: PathBuf,
        /// Defaults to a `replay` directory next to the manifest.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
}

impl Common {
    fn resolve(&self) -> Result<(ExperimentConfig, PathBuf)> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        let out = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        cfg.output_dir = Some(out.clone());
        Ok((cfg, out))
    }
}

fn print_json<T: serde::Serialize>(value: &T) {
    print!("{}", String::from_utf8_lossy(&to_json_bytes(value)));
}

fn done(out: &Path) {
    eprintln!("artifacts written to {}", out.display());
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => {
            let (cfg, out) = c.resolve()?;
            let res = pnpf_cli::run_experiment(&cfg, &out, c.jobs)?;
            print_json(&res.report);
            done(&out);
        }
        Command::Generate(c) => {
            let (cfg, out) = c.resolve()?;
            pnpf_cli::generate(&cfg, &out, c.jobs)?;
            done(&out);
        }
        Command::Solve { input, common } => {
            let (cfg, out) = common.resolve()?;
            pnpf_cli::solve(&cfg, &input, &out, common.jobs)?;
            done(&out);
        }
        Command::Eval {
            input,
            truth,
            common,
        } => {
            let (cfg, out) = common.resolve()?;
            let res = pnpf_cli::eval(&cfg, &input, &truth, &out)?;
            print_json(&res.report);
            done(&out);
        }
        Command::Ablate { kind, common } => {
            let (cfg, out) = common.resolve()?;
            let kind = match kind {
                Kind::PnpStrategies => AblationKind::PnpStrategies,
                Kind::FocalInit => AblationKind::FocalInit,
                Kind::Refinement => AblationKind::Refinement,
            };
            let res = pnpf_cli::run_ablation(kind, &cfg, &out, common.jobs)?;
            let table = pnpf_cli::experiment::ablation_csv(&res.cells)?;
            print!("{}", String::from_utf8_lossy(&table));
            done(&out);
        }
        Command::Replay {
            manifest,
            out,
            jobs,
        } => {
            let out = out.unwrap_or_else(|| {
                manifest
                    .parent()
                    .unwrap_or_else(|| Path::new("."))
                    .join("replay")
            });
            let m = pnpf_cli::replay(&manifest, &out, jobs)?;
            println!(
                "{} artifacts reproduced byte-identically",
                m.artifacts.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
