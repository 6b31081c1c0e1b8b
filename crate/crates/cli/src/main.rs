//! `daeobs` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod output;
mod problem;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error("{step}: {source}")]
    Core { step: &'static str, source: daeobs::Error },
    #[error("{0}")]
    EquivalenceFailed(String),
    #[error("{0}")]
    InvariantFailed(String),
}

impl From<daeobs::Error> for CliError {
    fn from(source: daeobs::Error) -> Self {
        CliError::Core { step: "input validation", source }
    }
}

impl CliError {
    pub fn at(step: &'static str) -> impl FnOnce(daeobs::Error) -> CliError {
        move |source| CliError::Core { step, source }
    }

    pub fn exit_code(&self) -> u8 {
        use daeobs::Error as E;
        match self {
            CliError::Parse(_) | CliError::Io(_) => 1,
            CliError::Core { source, .. } => match source {
                E::Dimension { .. } | E::InvalidInput(_) | E::NotPositiveDefinite(_) | E::Inconsistent { .. } => 1,
                E::NotStabilizable(_) => 2,
                E::NotEstimable { .. } => 3,
                E::Internal(_) => 11,
            },
            CliError::EquivalenceFailed(_) => 12,
            CliError::InvariantFailed(_) => 13,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "daeobs", version, about = "Minimax observers and LQ control for linear DAEs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Problem file (JSON).
    pub input: PathBuf,
    /// Report path; stdout when absent. A directory for `simulate`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Relative tolerance for numerical rank decisions.
    #[arg(long)]
    pub rank_tol: Option<f64>,
    /// Residual tolerance of the Riccati solve.
    #[arg(long)]
    pub are_tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Integration step.
    #[arg(long)]
    pub step: Option<f64>,
    /// Final time.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Seed of the batch generator.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of noise realizations.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Sample noise from the unit ellipsoid (default).
    #[arg(long, conflicts_with = "clean")]
    pub noisy: bool,
    /// Zero noise with a random consistent initial state.
    #[arg(long)]
    pub clean: bool,
}

#[derive(Debug, Clone, Args)]
pub struct EquivalenceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Number of randomized construction pairs.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Seed of the batch generator.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Perturb the computed transformation before checking it.
    #[arg(long)]
    pub corrupt: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Observer for `ell^T F x` from an estimation file (F, A, H, Q0, Q, R, ell).
    SynthesizeObserver(Common),
    /// Infinite-horizon LQ controller for a DAE file (E, A_hat, B_hat, Q, R, Q0, optional x0).
    SolveLq(Common),
    /// Associated LTI of a DAE file (E, A_hat, B_hat).
    AssociatedLti(Common),
    /// Simulate the observer on sampled noise; writes run CSVs and summary.json.
    Simulate(SimulateArgs),
    /// Feedback equivalence of randomized constructions.
    CheckEquivalence(EquivalenceArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SynthesizeObserver(c) => commands::synthesize_observer(c),
        Command::SolveLq(c) => commands::solve_lq(c),
        Command::AssociatedLti(c) => commands::associated_lti(c),
        Command::Simulate(a) => commands::simulate(a),
        Command::CheckEquivalence(a) => commands::check_equivalence(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
