//! `fwmbs`: dispersion tables, coupled-mode curves, split-step runs, sweeps
//! and design reports from one sectioned config file.
//!
//! Exit codes: 0 success, 1 configuration or validation error, 2 physics or
//! numerics error (cutoff, overflow, unreachable target, ...).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{BranchChoice, SweepAxis};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] fwmbs::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_physics() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "fwmbs", version, about = "Bragg-scattering frequency conversion in Si3N4 waveguides")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML with unit-suffixed values).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Material file replacing the bundled one.
    #[arg(long, global = true, env = "FWMBS_MATERIALS")]
    pub materials: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for sweeps and tables.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Accepted for interface stability; every computation is deterministic.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate n_eff, β, β₂, D and γ and report the zero-dispersion wavelengths.
    Dispersion,
    /// Coupled-mode efficiency and phase-matching curve.
    Analytic {
        #[arg(long, value_enum)]
        branch: Option<BranchChoice>,
    },
    /// One split-step run: spectrum and manifest.
    Propagate,
    /// Width, dispersion check and pump power for an emitter.
    Design(DesignArgs),
    /// Split-step runs over one parameter.
    Sweep(SweepArgs),
    /// List and validate the material database.
    Materials,
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    /// Preset: nv637, rb780, cs852 or qd980.
    #[arg(long)]
    pub emitter: Option<String>,
    /// Emitter wavelength with unit, e.g. "780 nm".
    #[arg(long, conflicts_with = "emitter")]
    pub wavelength: Option<String>,
    /// Pump offset from the emitter with unit, e.g. "6 nm".
    #[arg(long)]
    pub pump_offset: Option<String>,
    #[arg(long)]
    pub eta_target: Option<f64>,
    /// Run every preset.
    #[arg(long, conflicts_with_all = ["emitter", "wavelength"])]
    pub all: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: Option<SweepAxis>,
    /// First value with unit, e.g. "0 W" or "970 nm".
    #[arg(long, allow_hyphen_values = true)]
    pub start: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub stop: Option<String>,
    #[arg(long)]
    pub points: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(1);
        }
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
