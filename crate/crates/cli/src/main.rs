//! `aet`: mesh generation, data simulation, reconstruction and evaluation.
//!
//! Exit codes: 0 on success, 1 on runtime or I/O failure, 2 on usage or
//! configuration errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use aet_core::AetError;
use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl From<AetError> for CliError {
    fn from(e: AetError) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "aet", version, about = "Conductivity reconstruction from interior power-density data")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a unit-disk mesh.
    Mesh {
        /// Target edge length in (0, 1).
        #[arg(long)]
        h: f64,
        /// Output `.msh` path.
        #[arg(long)]
        out: PathBuf,
        /// Also write a VTK file of the mesh.
        #[arg(long)]
        vtk: Option<PathBuf>,
    },
    /// Simulate power-density data for an experiment.
    Simulate(ExperimentArgs),
    /// Reconstruct the conductivity from simulated data.
    Reconstruct(ExperimentArgs),
    /// Compare a conductivity with the truth.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
pub struct ExperimentArgs {
    /// Experiment TOML file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set recon.beta=0.7`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for per-dataset solves; results are reproducible
    /// bit for bit only with 1.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Conductivity field file.
    #[arg(long)]
    sigma: PathBuf,
    /// Mesh of the conductivity.
    #[arg(long)]
    mesh: PathBuf,
    /// Truth field file.
    #[arg(long)]
    truth: PathBuf,
    /// Mesh of the truth when it differs from `--mesh`.
    #[arg(long)]
    truth_mesh: Option<PathBuf>,
    /// Interpolate the conductivity onto the truth mesh when they differ.
    #[arg(long)]
    interpolate: bool,
    /// Write the metrics as TOML.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Mesh { h, out, vtk } => commands::mesh(h, &out, vtk.as_deref()),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Reconstruct(args) => commands::reconstruct(&args),
        Command::Evaluate(args) => commands::evaluate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (CliError::Usage(m) | CliError::Runtime(m)) = &e;
            eprintln!("error: {m}");
            ExitCode::from(e.code())
        }
    }
}
