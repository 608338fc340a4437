//! `vwci`: solves for b, tabulates coverage and efficiency, finds τ_max and
//! emits the asymptotic tables. One command per invocation; every run writes
//! `<command>.manifest.json` next to its artifacts.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "vwci", version, about = "Variable-width confidence intervals containing thresholding estimates")]
struct Cli {
    /// Key-value config file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for relative output paths and the manifest.
    #[arg(long, global = true, env = "VWCI_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the b-function minimizing weighted expected length.
    SolveB(SolveArgs),
    /// Tabulate coverage, expected length and efficiency over a ψ grid.
    EfficiencyCurve(CurveArgs),
    /// Minimum coverage on a fine grid, with an optional Monte Carlo check.
    CoverageAudit(AuditArgs),
    /// Largest τ for which an estimator stays inside the interval.
    TauMax(TauArgs),
    /// Interval endpoints and the estimate as functions of x.
    FigureProfile(ProfileArgs),
    /// Coverage-based lower bound on the scaled length under consistent tuning.
    Theorem1(Theorem1Args),
    /// Distance between the unknown- and known-variance intervals as n grows.
    Theorem2(Theorem2Args),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SolveB(_) => "solve-b",
            Command::EfficiencyCurve(_) => "efficiency-curve",
            Command::CoverageAudit(_) => "coverage-audit",
            Command::TauMax(_) => "tau-max",
            Command::FigureProfile(_) => "figure-profile",
            Command::Theorem1(_) => "theorem1",
            Command::Theorem2(_) => "theorem2",
        }
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    alpha: Option<f64>,
    /// Weight on the diffuse component of the length objective.
    #[arg(long)]
    w: Option<f64>,
    /// e vanishes outside [-q, q].
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    knots: Option<usize>,
    /// Standard deviation of the diffuse component.
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    constraint_tol: Option<f64>,
    #[arg(long)]
    lipschitz: Option<f64>,
    /// Spacing of the coverage constraint grid.
    #[arg(long)]
    grid_step: Option<f64>,
    /// Right end of the constraint grid (default q + 4).
    #[arg(long)]
    grid_max: Option<f64>,
    #[arg(long)]
    out: Option<String>,
    /// Iteration log CSV.
    #[arg(long)]
    log: Option<String>,
}

#[derive(Debug, Args)]
struct CurveArgs {
    /// `standard` or a path to a b-function JSON file.
    #[arg(long)]
    bfun: Option<String>,
    /// Only used with `--bfun standard`.
    #[arg(long)]
    alpha: Option<f64>,
    /// Grid is [-psi-max, psi-max].
    #[arg(long)]
    psi_max: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Sample size; switches to the unknown-variance interval.
    #[arg(long)]
    n: Option<u64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[arg(long)]
    bfun: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Grid is [-psi-max, psi-max] (default q + 9).
    #[arg(long)]
    psi_max: Option<f64>,
    /// Monte Carlo draws at the worst ψ; 0 skips the check.
    #[arg(long)]
    mc_draws: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct TauArgs {
    #[arg(long)]
    bfun: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// hard, lasso, adaptive-lasso or scad.
    #[arg(long)]
    kind: Option<String>,
    /// SCAD shape parameter.
    #[arg(long)]
    a: Option<f64>,
    /// Bisection tolerance on τ.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct ProfileArgs {
    #[arg(long)]
    bfun: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    kind: Option<String>,
    /// Threshold (default z).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    x_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    x_max: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct Theorem1Args {
    /// η_n = n^(-gamma).
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Comma-separated sample sizes.
    #[arg(long)]
    n_values: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Debug, Args)]
struct Theorem2Args {
    #[arg(long)]
    bfun: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    n_values: Option<String>,
    /// Grid is [0, psi-max] (default q + 9).
    #[arg(long)]
    psi_max: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    out: Option<String>,
}

/// Exit 2 for usage and input errors, 3 for numeric failures, 1 for I/O.
#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
    exit_code: u8,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { kind: "usage", message: message.into(), exit_code: 2 }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { kind: "io", message: message.into(), exit_code: 1 }
    }

    fn report(&self) -> ExitCode {
        let record = json!({ "error": self.kind, "message": self.message, "exit_code": self.exit_code });
        eprintln!("{record}");
        ExitCode::from(self.exit_code)
    }
}

impl From<vwci_core::Error> for CliError {
    fn from(e: vwci_core::Error) -> Self {
        let exit_code = match e {
            vwci_core::Error::Solver { .. } | vwci_core::Error::Convergence { .. } => 3,
            _ => 2,
        };
        CliError { kind: e.kind(), message: e.to_string(), exit_code }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return CliError::usage(e.to_string().trim_end()).report(),
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
