//! Command-line front end for `hnsd-core`.
//!
//! Each subcommand writes its report to the supplied streams and returns a [`Status`]; the binary
//! maps that to exit code 0 (success) or 1 (validation failure). Errors carry their own code:
//! 1 for validation failures that abort early, 2 for I/O and schema problems.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hnsd_core::hypergraph::HypergraphError;
use hnsd_core::laplacian::LaplacianError;
use hnsd_core::nn::NnError;
use hnsd_core::sheaf::SheafError;
use hnsd_core::simplicial::SkeletonError;
use thiserror::Error;

pub mod commands;
pub mod config;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Schema(String),
    #[error("{0}")]
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Io { .. } | CliError::Schema(_) => 2,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

impl From<HypergraphError> for CliError {
    fn from(e: HypergraphError) -> Self {
        CliError::Schema(e.to_string())
    }
}

impl From<SkeletonError> for CliError {
    fn from(e: SkeletonError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SheafError> for CliError {
    fn from(e: SheafError) -> Self {
        match e {
            SheafError::Json(_) | SheafError::Shape { .. } | SheafError::Missing { .. } | SheafError::BadEntry { .. } => {
                CliError::Schema(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<LaplacianError> for CliError {
    fn from(e: LaplacianError) -> Self {
        match e {
            LaplacianError::Sheaf(inner) => inner.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        match e {
            NnError::Config(_) | NnError::Shape { .. } | NnError::Parse { .. } => CliError::Schema(e.to_string()),
            NnError::Laplacian(inner) => inner.into(),
            NnError::Sheaf(inner) => inner.into(),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Schema(e.to_string())
    }
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Passed,
    Failed,
}

impl Status {
    pub fn exit_code(self) -> u8 {
        match self {
            Status::Passed => 0,
            Status::Failed => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hnsd", version, about = "Sheaf Laplacians and sheaf diffusion on hypergraphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the structural invariant suite on a hypergraph file.
    Check(CheckArgs),
    /// Print node count, hyperedge count, and average hyperedge size.
    Stats(StatsArgs),
    /// Export a degree-k sheaf Laplacian as CSV triplets.
    Laplacian(LaplacianArgs),
    /// Explicit Euler sheaf diffusion with a Dirichlet-energy trace.
    Diffuse(DiffuseArgs),
    /// Train the sheaf diffusion model over seeded runs.
    Train(TrainArgs),
    /// Rebuild the hypergraph from its simplicial set and compare with the input.
    Reconstruct(ReconstructArgs),
    /// Compare analytic gradients with central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SheafKind {
    Identity,
    Random,
    File,
}

#[derive(Debug, Clone, Args)]
pub struct SheafArgs {
    #[arg(long, value_enum, default_value_t = SheafKind::Identity)]
    pub sheaf: SheafKind,
    /// JSON sheaf, required with `--sheaf file`.
    #[arg(long)]
    pub sheaf_file: Option<PathBuf>,
    /// Stalk dimension for generated sheaves.
    #[arg(long, default_value_t = 1)]
    pub stalk_dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct CheckArgs {
    pub hypergraph: PathBuf,
    /// Lowest eigenvalue accepted as nonnegative is `-tol`.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Refuse skeletons predicted to exceed this many simplices.
    #[arg(long)]
    pub cap: Option<u128>,
    #[arg(long, default_value_t = 2)]
    pub stalk_dim: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    pub hypergraph: PathBuf,
    /// One integer label per line; adds a class count.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub expect_nodes: Option<usize>,
    #[arg(long)]
    pub expect_edges: Option<usize>,
    /// Compared after rounding the average to two decimals.
    #[arg(long)]
    pub expect_avg: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct LaplacianArgs {
    pub hypergraph: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub degree: usize,
    #[command(flatten)]
    pub sheaf: SheafArgs,
    /// Export `D^{-1/2} L D^{-1/2}` instead of `L`.
    #[arg(long)]
    pub normalized: bool,
    /// Relative pseudo-inverse threshold used by `--normalized`.
    #[arg(long, default_value_t = hnsd_core::laplacian::DEFAULT_PINV_REL_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub cap: Option<u128>,
    /// Skip the extreme-eigenvalue summary.
    #[arg(long)]
    pub no_spectrum: bool,
    /// CSV destination; without it the CSV goes to stdout and the summary to stderr.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitKind {
    Random,
    Constant,
}

#[derive(Debug, Clone, Args)]
pub struct DiffuseArgs {
    pub hypergraph: PathBuf,
    #[command(flatten)]
    pub sheaf: SheafArgs,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.25)]
    pub step_size: f64,
    /// Diffuse with `L` rather than the normalized Laplacian.
    #[arg(long)]
    pub unnormalized: bool,
    #[arg(long, value_enum, default_value_t = InitKind::Random)]
    pub init: InitKind,
    #[arg(long, default_value_t = 1)]
    pub channels: usize,
    #[arg(long)]
    pub cap: Option<u128>,
    /// Energy trace destination; stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the model seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for per-run metric traces; overrides the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReconstructArgs {
    pub hypergraph: PathBuf,
    #[arg(long)]
    pub cap: Option<u128>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Training config; a small synthetic problem is used without it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Central-difference step; truncation error scales with its square.
    #[arg(long, default_value_t = 1e-6)]
    pub step: f64,
    /// Largest accepted relative error per tensor.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
}

/// Runs `cli`, reporting to `out` and `err`, and returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    let result = match cli.command {
        Command::Check(a) => commands::check(&a, out),
        Command::Stats(a) => commands::stats(&a, out),
        Command::Laplacian(a) => commands::laplacian(&a, out, err),
        Command::Diffuse(a) => commands::diffuse(&a, out, err),
        Command::Train(a) => commands::train(&a, out),
        Command::Reconstruct(a) => commands::reconstruct(&a, out),
        Command::Gradcheck(a) => commands::gradcheck(&a, out),
    };
    match result {
        Ok(status) => status.exit_code(),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
