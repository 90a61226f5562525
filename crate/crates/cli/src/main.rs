//! The `wavetank` binary: `run` for single simulations, `sweep` for
//! multi-point experiments, `presets list` to see what ships built in.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};

use wavetank_cli::config::{parse_config, ExperimentConfig};
use wavetank_cli::{experiments, output, presets};

#[derive(Parser)]
#[command(
    name = "wavetank",
    version,
    about = "Linear free-surface wave tank: energy, period, error and dispersion experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// Config file path, or the name of a built-in preset.
    config: String,
    /// Override the configured output directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the linear-solver tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Size of the worker pool for sweep points (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single-simulation configuration.
    Run(RunArgs),
    /// Run a multi-point sweep configuration.
    Sweep(RunArgs),
    /// Inspect the built-in presets.
    Presets {
        #[command(subcommand)]
        action: PresetsAction,
    },
}

#[derive(Subcommand)]
enum PresetsAction {
    /// List preset names with one-line summaries.
    List,
}

fn main() {
    if let Err(err) = real_main() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn real_main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => execute(args, false),
        Command::Sweep(args) => execute(args, true),
        Command::Presets { action: PresetsAction::List } => {
            for preset in presets::PRESETS {
                println!("{:<32} {}", preset.name, preset.summary);
            }
            Ok(())
        }
    }
}

fn load_config(name_or_path: &str) -> Result<ExperimentConfig> {
    if let Some(preset) = presets::find(name_or_path) {
        return parse_config(preset.text).with_context(|| format!("preset `{name_or_path}`"));
    }
    let text = std::fs::read_to_string(name_or_path)
        .with_context(|| format!("reading config `{name_or_path}`"))?;
    parse_config(&text).with_context(|| format!("config `{name_or_path}`"))
}

fn execute(args: RunArgs, want_sweep: bool) -> Result<()> {
    let mut cfg = load_config(&args.config)?;
    if let Some(tol) = args.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            bail!("--tol must be positive, got {tol}");
        }
        cfg.tol = tol;
    }
    if let Some(dir) = args.out_dir {
        cfg.out_dir = dir.to_string_lossy().into_owned();
    }
    if cfg.experiment.is_sweep() != want_sweep {
        if want_sweep {
            bail!("`{}` is a single-run configuration; use `wavetank run`", args.config);
        }
        bail!("`{}` is a sweep configuration; use `wavetank sweep`", args.config);
    }
    if let Some(n) = args.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }

    let out = experiments::run_experiment(&cfg)?;
    let written = output::write_outputs(Path::new(&cfg.out_dir), &cfg, &out.files, &out.results)?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
