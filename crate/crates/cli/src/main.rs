mod commands;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ils_core::krylov::{SolverConfig, DEFAULT_MAXIT, DEFAULT_TOL};
use ils_core::{Error, SystemKind};

/// Preconditioned GMRES for indefinite least squares problems.
#[derive(Debug, Parser)]
#[command(name = "ils", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one problem with one method and print a JSON report
    Solve(commands::SolveArgs),
    /// Run a list of methods on a list of problems and write a CSV table
    Bench(commands::BenchArgs),
    /// Solve with the P(alpha) preconditioner over a grid of alpha values
    SweepAlpha(commands::SweepArgs),
    /// Write eigenvalues of the preconditioned operators as CSV
    Spectrum(commands::SpectrumArgs),
    /// Write a generated problem as Matrix Market files plus a manifest
    Generate(commands::GenerateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Relative residual tolerance
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAXIT)]
    pub maxit: usize,
    /// Restart length; full GMRES when omitted
    #[arg(long)]
    pub restart: Option<usize>,
}

impl SolverArgs {
    pub fn config(&self) -> ils_core::Result<SolverConfig> {
        let cfg = SolverConfig {
            tol: self.tol,
            maxit: self.maxit,
            restart: self.restart,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Output file; stdout when omitted.
#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn parse_system(s: &str) -> Result<SystemKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// A solve that ran to completion without meeting the tolerance.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct NotConverged(String);

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<NotConverged>().is_some() {
        return EXIT_NOT_CONVERGED;
    }
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(Error::Io(_) | Error::Json(_) | Error::Csv(_)) | None => EXIT_FAILURE,
        Some(Error::NoConvergence { .. } | Error::Breakdown { .. }) => EXIT_NOT_CONVERGED,
        Some(_) => EXIT_INVALID,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => commands::solve(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::SweepAlpha(a) => commands::sweep_alpha(&a),
        Command::Spectrum(a) => commands::spectrum(&a),
        Command::Generate(a) => commands::generate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("ils: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
