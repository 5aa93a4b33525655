//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{Result, RunError};
use crate::experiments::{execute, write_outputs, MANIFEST_NAME};
use crate::manifest::Manifest;
use crate::parallel::{resolve_threads, THREADS_ENV};

#[derive(Debug, Parser)]
#[command(name = "odeflow", version, about = "Large-depth residual network experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train across depths; successive gaps and distances to a reference depth.
    LargeDepthSweep(RunArgs),
    /// One long run: loss decay, PL ratios, weight profiles.
    LongTime(RunArgs),
    /// Discretization gaps of trained networks against fine Euler solves.
    OdeCompare(RunArgs),
    /// Scalar ReLU network fitting `C x` over an (L, C) grid.
    ReluCx(RunArgs),
    /// Short run recording the PL ratio along training.
    PlCheck(RunArgs),
    /// Normalized Hermite coefficients of an activation.
    Hermite(RunArgs),
    /// Smallest singular value of random features against the Hermite bound.
    SminProbe(RunArgs),
    /// Print the default configuration of an experiment.
    Defaults {
        #[arg(value_enum)]
        experiment: ExperimentKind,
    },
    /// Check the files of an output directory against its manifest.
    Verify {
        dir: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON config overlaid on the experiment defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Initialization seed; overrides `seed` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = THREADS_ENV)]
    pub threads: Option<usize>,
    /// Validate the config and print it without running.
    #[arg(long)]
    pub dry_run: bool,
}

impl Command {
    fn experiment(&self) -> Option<(ExperimentKind, &RunArgs)> {
        Some(match self {
            Command::LargeDepthSweep(a) => (ExperimentKind::LargeDepthSweep, a),
            Command::LongTime(a) => (ExperimentKind::LongTime, a),
            Command::OdeCompare(a) => (ExperimentKind::OdeCompare, a),
            Command::ReluCx(a) => (ExperimentKind::ReluCx, a),
            Command::PlCheck(a) => (ExperimentKind::PlCheck, a),
            Command::Hermite(a) => (ExperimentKind::Hermite, a),
            Command::SminProbe(a) => (ExperimentKind::SminProbe, a),
            Command::Defaults { .. } | Command::Verify { .. } => return None,
        })
    }
}

/// Resolved config of a run subcommand, with CLI overrides applied.
pub fn load_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig> {
    let text = match &args.config {
        Some(path) => std::fs::read_to_string(path).map_err(RunError::io(path))?,
        None => "{}".to_string(),
    };
    let mut cfg = ExperimentConfig::from_json(kind, &text)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| Path::new("out").join(cfg.experiment.name()))
}

fn verify(dir: &Path) -> Result<()> {
    let path = dir.join(MANIFEST_NAME);
    let bytes = std::fs::read(&path).map_err(RunError::io(&path))?;
    let manifest: Manifest = serde_json::from_slice(&bytes)
        .map_err(|e| RunError::Format { path: path.clone(), message: e.to_string() })?;
    let bad = manifest.verify(|name| std::fs::read(dir.join(name)).ok());
    if bad.is_empty() {
        println!("{} files match the manifest", manifest.files.len());
        Ok(())
    } else {
        Err(RunError::Format { path, message: format!("files differ from the manifest: {}", bad.join(", ")) })
    }
}

/// Runs the parsed command, printing a short report on stdout.
pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Defaults { experiment } => {
            let json = serde_json::to_string_pretty(&ExperimentConfig::defaults(*experiment).to_json())
                .expect("config serializes");
            println!("{json}");
            return Ok(());
        }
        Command::Verify { dir } => return verify(dir),
        _ => {}
    }
    let (kind, args) = cli.command.experiment().expect("run subcommand");
    let cfg = load_config(kind, args)?;
    if args.dry_run {
        println!("{}", serde_json::to_string_pretty(&cfg.to_json()).expect("config serializes"));
        return Ok(());
    }
    let threads = resolve_threads(args.threads).map_err(|m| RunError::config("--threads", m))?;
    let files = execute(&cfg, threads)?;
    let dir = output_dir(&cfg);
    let manifest = write_outputs(&dir, &cfg, &files)?;
    for f in &manifest.files {
        println!("{}  {}", f.sha256, dir.join(&f.name).display());
    }
    println!("content hash {}", manifest.content_hash);
    Ok(())
}
