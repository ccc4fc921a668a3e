//! `subspace-sim`: runs one experiment per invocation from a JSON config.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration/schema error,
//! 3 engine inadmissibility. Errors print one JSON record on stderr and
//! leave no output files.

mod commands;
mod config;
mod engines;
mod error;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::{Engine, Experiment, ExperimentConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "subspace-sim", version, about = "Subspace-based simulation of parameterized quantum circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON); flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "SUBSPACE_SIM_THREADS")]
    threads: Option<usize>,
    /// Output directory (default: current directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Lie closure of the circuit's generators.
    Dla,
    /// Losses over parameter draws with one engine.
    Simulate {
        #[arg(long, value_enum)]
        engine: Option<Engine>,
    },
    /// Loss variance across system sizes, with a concentration verdict.
    VarianceScan {
        #[arg(long, value_enum)]
        engine: Option<Engine>,
    },
    /// Classical-shadow acquisition and estimation.
    Shadows {
        #[command(subcommand)]
        action: ShadowAction,
    },
    /// Per-draw differences between two engines.
    Compare {
        #[arg(long, value_enum, num_args = 2)]
        engines: Option<Vec<Engine>>,
    },
    /// Heisenberg-evolved mass outside a subspace.
    Leakage,
    /// Discrete versus continuous input ensembles for a fixed circuit.
    SplitAb,
}

#[derive(Subcommand)]
enum ShadowAction {
    Acquire,
    Estimate,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| CliError::schema("config", format!("{}: {e}", p.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    let experiment = match &cli.command {
        Command::Dla => Experiment::Dla,
        Command::Simulate { engine } | Command::VarianceScan { engine } => {
            if engine.is_some() {
                cfg.engine = *engine;
            }
            if matches!(cli.command, Command::Simulate { .. }) {
                Experiment::Simulate
            } else {
                Experiment::VarianceScan
            }
        }
        Command::Shadows { action: ShadowAction::Acquire } => Experiment::ShadowsAcquire,
        Command::Shadows { action: ShadowAction::Estimate } => Experiment::ShadowsEstimate,
        Command::Compare { engines } => {
            if engines.is_some() {
                cfg.engines = engines.clone();
            }
            Experiment::Compare
        }
        Command::Leakage => Experiment::Leakage,
        Command::SplitAb => Experiment::SplitAb,
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.resolve(experiment)?;
    Ok(cfg)
}

fn write_all(dir: &Path, files: &commands::Files) -> Result<Vec<PathBuf>, CliError> {
    let io = |e: std::io::Error| CliError::Runtime(format!("writing outputs to {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(io)?;
        written.push(path);
    }
    Ok(written)
}

fn main() {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let outcome = load(&cli).and_then(|cfg| {
        let files = commands::run(&cfg)?;
        write_all(cfg.out.as_deref().unwrap_or(Path::new(".")), &files)
    });
    match outcome {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
        }
        Err(e) => {
            eprintln!("{}", e.record());
            std::process::exit(e.exit_code());
        }
    }
}
