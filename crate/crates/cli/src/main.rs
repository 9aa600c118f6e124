//! `billiards`: command-line front end for rational-billiard and
//! translation-surface experiments.

mod commands;
mod inputs;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use billiards_core::deviation::DeviationError;
use billiards_core::flow::FlowError;
use billiards_core::geometry::GeometryError;
use billiards_core::renorm::RenormError;
use billiards_core::surface::SurfaceError;
use billiards_core::Tolerances;

use commands::{deviate, lyapunov, schedule, trace, unfold};
use manifest::Recorder;

#[derive(Debug, Parser)]
#[command(name = "billiards", version, about = "Rational billiards and translation-surface dynamics")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command.
#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct Global {
    /// Seed for all randomness in the run.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for sweeps (defaults to all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Tolerance profile: default, strict or loose.
    #[arg(long, global = true, default_value = "default")]
    pub tol_profile: String,
    /// Directory for output files and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,
}

impl Global {
    pub fn tolerances(&self) -> anyhow::Result<Tolerances> {
        Tolerances::profile(&self.tol_profile)
            .ok_or_else(|| InputError(format!("unknown tolerance profile {:?}", self.tol_profile)).into())
    }
}

#[derive(Clone, Debug, Subcommand, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Unfold a rational polygon into a translation surface.
    Unfold(unfold::UnfoldArgs),
    /// Trace one trajectory of a directional flow.
    Trace(trace::TraceArgs),
    /// Deviation of ergodic integrals over a sweep of directions.
    Deviate(deviate::DeviateArgs),
    /// Deviation of trajectory homology classes from the asymptotic cycle.
    HomologyDeviate(deviate::HomologyDeviateArgs),
    /// Lyapunov exponents of the Zorich cocycle for a permutation.
    Lyapunov(lyapunov::LyapunovArgs),
    /// Lyapunov exponents along the first-return map of surface directions.
    DirectionExponent(lyapunov::DirectionExponentArgs),
    /// Decompose a time into segments from a nondecreasing sequence.
    Decompose(schedule::DecomposeArgs),
    /// Sampling schedule of compact-set visits along a Teichmüller orbit.
    SampleTimes(schedule::SampleTimesArgs),
    /// Systole along a Teichmüller orbit and recurrence fractions.
    SystoleScan(schedule::SystoleScanArgs),
    /// Re-run a recorded manifest and compare outputs.
    #[serde(skip)]
    Replay(manifest::ReplayArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Unfold(_) => "unfold",
            Command::Trace(_) => "trace",
            Command::Deviate(_) => "deviate",
            Command::HomologyDeviate(_) => "homology-deviate",
            Command::Lyapunov(_) => "lyapunov",
            Command::DirectionExponent(_) => "direction-exponent",
            Command::Decompose(_) => "decompose",
            Command::SampleTimes(_) => "sample-times",
            Command::SystoleScan(_) => "systole-scan",
            Command::Replay(_) => "replay",
        }
    }
}

/// Malformed command-line or file input.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InputError(pub String);

/// Runs a recorded command, writing outputs through `rec`.
pub fn execute(command: &Command, global: &Global, rec: &mut Recorder) -> anyhow::Result<()> {
    match command {
        Command::Unfold(a) => unfold::run(a, global, rec),
        Command::Trace(a) => trace::run(a, global, rec),
        Command::Deviate(a) => deviate::run(a, global, rec),
        Command::HomologyDeviate(a) => deviate::run_homology(a, global, rec),
        Command::Lyapunov(a) => lyapunov::run(a, global, rec),
        Command::DirectionExponent(a) => lyapunov::run_direction(a, global, rec),
        Command::Decompose(a) => schedule::run_decompose(a, global, rec),
        Command::SampleTimes(a) => schedule::run_sample_times(a, global, rec),
        Command::SystoleScan(a) => schedule::run_systole_scan(a, global, rec),
        Command::Replay(_) => unreachable!("replay is dispatched separately"),
    }
}

/// Runs `f` on a pool of `jobs` threads.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        b = b.num_threads(j.max(1));
    }
    let pool = b.build().context("building thread pool")?;
    Ok(pool.install(f))
}

/// Exit status: 2 for input errors, 3 for numerical aborts, 4 for exhausted
/// budgets, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<InputError>()
            || cause.is::<std::io::Error>()
            || cause.is::<serde_json::Error>()
            || cause.is::<toml::de::Error>()
            || cause.is::<GeometryError>()
        {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<SurfaceError>() {
            return surface_code(e);
        }
        if let Some(e) = cause.downcast_ref::<FlowError>() {
            return flow_code(e);
        }
        if let Some(e) = cause.downcast_ref::<RenormError>() {
            return renorm_code(e);
        }
        if let Some(e) = cause.downcast_ref::<DeviationError>() {
            return match e {
                DeviationError::Inexact { .. } => 3,
                DeviationError::Flow(f) => flow_code(f),
                DeviationError::Surface(s) => surface_code(s),
                _ => 2,
            };
        }
    }
    1
}

fn flow_code(e: &FlowError) -> u8 {
    match e {
        FlowError::SingularHit { .. } | FlowError::NumericalDrift(_) => 3,
        FlowError::NonReturning { .. } => 4,
        FlowError::InvalidArgument(_) => 2,
        FlowError::Surface(s) => surface_code(s),
        FlowError::Renorm(r) => renorm_code(r),
    }
}

fn surface_code(e: &SurfaceError) -> u8 {
    match e {
        SurfaceError::BudgetExceeded { .. } => 4,
        _ => 2,
    }
}

fn renorm_code(e: &RenormError) -> u8 {
    match e {
        RenormError::NonTerminating { .. } | RenormError::TieBreakUndefined | RenormError::LengthDrift { .. } => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Replay(a) => manifest::replay(a, &cli.global),
        cmd => manifest::record(cmd, &cli.global),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
