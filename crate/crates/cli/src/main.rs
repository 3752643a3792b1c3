//! `struct-imitate`: ingest demonstrations, predict Euclidean, temporal and
//! manifold trajectories, and score predictions.

// `!(x > bound)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{GridSpec, RunConfig};
use crate::error::{CliError, CliResult};

const OUTPUT_HELP: &str = "\
Output CSV columns (one row per query, in query order):
  predict, predict-manifold: x0.., mu0.., sigma<i>_<j>.. (row-major), flags
  predict-temporal:          t, pos0.., vel0..
flags is one of ok, clamped, nonconverged, clamped|nonconverged.
Numbers are written with 17 significant digits.

Environment:
  STRUCT_IMITATE_THREADS  caps the worker threads used over query points
  RUST_LOG                log filter (default: warn)

Errors are printed as a single line `error[<kind>]: <message>` with a nonzero exit code.";

#[derive(Debug, Parser)]
#[command(name = "struct-imitate", version, about, after_help = OUTPUT_HELP)]
struct Cli {
    /// JSON run configuration; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Aggregate aligned demonstration CSV files into a trajectory JSON.
    Ingest(IngestArgs),
    /// Predict a Euclidean trajectory, optionally through via-points or a superposition.
    Predict(PredictArgs),
    /// Predict positions and velocities over time.
    PredictTemporal(TemporalArgs),
    /// Predict a trajectory on a sphere, cylinder or product manifold.
    PredictManifold(ManifoldArgs),
    /// Score a prediction CSV against a reference (CSV or trajectory JSON).
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Demonstration CSV files; columns named x* are inputs, y* outputs.
    #[arg(required = true)]
    demos: Vec<PathBuf>,
    /// Diagonal regularization added to every covariance.
    #[arg(long)]
    epsilon: Option<f64>,
    /// sphere, sphere:<radius>, cylinder, inline JSON, or a JSON file.
    #[arg(long)]
    manifold: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KernelArgs {
    /// Gaussian kernel width.
    #[arg(long)]
    kappa: Option<f64>,
    /// Ridge regularization.
    #[arg(long)]
    lambda: Option<f64>,
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Uniform scalar grid start:end:count (defaults to the training inputs).
    #[arg(long, conflicts_with = "grid_file")]
    grid: Option<GridSpec>,
    /// JSON list of query inputs (numbers or vectors).
    #[arg(long)]
    grid_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Kl,
    Rkl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CovArg {
    Exact,
    Approx,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Trajectory JSON.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// KL covariance variant.
    #[arg(long, value_enum)]
    cov_variant: Option<CovArg>,
    /// Via-point JSON.
    #[arg(long)]
    via: Option<PathBuf>,
    /// Superposition JSON (replaces --data).
    #[arg(long)]
    superpose: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TemporalArgs {
    /// {times, positions, velocities} JSON, or a trajectory JSON with time inputs.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Finite-difference half step (defaults to 1e-4 of the time span).
    #[arg(long)]
    delta: Option<f64>,
    /// JSON list of {t, position?, velocity?, weight}.
    #[arg(long)]
    via: Option<PathBuf>,
    /// Duration scale: the trajectory is replayed at t / tau.
    #[arg(long)]
    tau: Option<f64>,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ManifoldArgs {
    /// Trajectory JSON with manifold-valued means.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Needed when the data does not name its manifold.
    #[arg(long)]
    manifold: Option<String>,
    #[arg(long)]
    rgd_eta: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Defaults to approx.
    #[arg(long, value_enum)]
    cov_variant: Option<CovArg>,
    #[arg(long)]
    via: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Prediction CSV.
    #[arg(long)]
    pred: PathBuf,
    /// Reference prediction CSV or trajectory JSON.
    #[arg(long = "ref")]
    reference: PathBuf,
    /// Prediction time in seconds, copied into the report.
    #[arg(long)]
    wall_time: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var("STRUCT_IMITATE_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::usage(format!(
            "STRUCT_IMITATE_THREADS must be a positive integer, got '{value}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::usage(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Predict(a) => commands::predict_euclidean(a, &cfg),
        Command::PredictTemporal(a) => commands::predict_temporal(a, &cfg),
        Command::PredictManifold(a) => commands::predict_manifold(a, &cfg),
        Command::Eval(a) => commands::eval(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {message}", e.kind());
            ExitCode::FAILURE
        }
    }
}
