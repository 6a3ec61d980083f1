//! Configuration-driven experiment runner for the clustered caching model.
//!
//! Modes: `analyze` evaluates one operating point, `optimize` solves for the
//! access probability and caching vector, `simulate` compares one point with
//! Monte Carlo, and `sweep` tabulates a parameter axis. Results are CSV files
//! whose `# key=value` header block records the resolved configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod csv;
pub mod error;
pub mod experiments;
pub mod presets;

use std::path::PathBuf;

use clap::Parser;

pub use config::ExperimentConfig;
pub use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "cachesim",
    version,
    about = "Clustered D2D caching analysis and simulation"
)]
pub struct Cli {
    /// analyze, optimize, simulate or sweep.
    pub mode: config::Mode,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Start from a figure preset (fig1..fig6); config keys override it.
    #[arg(long)]
    pub preset: Option<presets::Figure>,
    /// Overrides `sim.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `output.path`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `sim.trials`.
    #[arg(long)]
    pub trials: Option<u64>,
}

/// Preset, then config file, then command-line flags.
pub fn resolve(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut cfg = cli.preset.map(presets::preset).unwrap_or_default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config("--config", format!("cannot read {}: {e}", path.display()))
        })?;
        cfg.merge_text(&text)?;
    }
    cfg.mode = cli.mode;
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.sim.trials = trials;
    }
    if let Some(out) = &cli.out {
        cfg.output_path = out.clone();
    }
    Ok(cfg)
}

/// Runs the experiment and writes its CSV files; returns the paths written.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let outputs = experiments::run_mode(cfg)?;
    let mut written = Vec::with_capacity(outputs.len());
    for (path, table) in outputs {
        table.write(&path, cfg)?;
        written.push(path);
    }
    Ok(written)
}
