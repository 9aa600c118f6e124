use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use billiards_core::deviation::{
    deviation_series, fit_exponent, homology_deviation_series, DeviationError, DeviationSeries, ExponentFit, Grid,
    WindowPolicy,
};
use billiards_core::flow::FlowPoint;

use crate::inputs::{directions, load_observable, load_surface, quantiles, start_point};
use crate::manifest::Recorder;
use crate::{with_jobs, Global};

/// Direction, start point and grid flags shared by both sweeps.
#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Surface spec (JSON) or polygon spec (TOML).
    #[arg(long)]
    pub surface: PathBuf,
    /// Explicit directions, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Vec<f64>,
    /// Number of random directions drawn from the seed.
    #[arg(long)]
    pub directions: Option<usize>,
    /// Start point `cell,x,y` (defaults to the centroid of cell 0).
    #[arg(long)]
    pub start: Option<String>,
    /// First grid time.
    #[arg(long, default_value_t = 10.0)]
    pub t0: f64,
    /// Largest grid time.
    #[arg(long, default_value_t = 1e6)]
    pub t_max: f64,
    /// Ratio between consecutive grid times.
    #[arg(long, default_value_t = Grid::DEFAULT_RATIO)]
    pub ratio: f64,
    /// Leading fraction of grid points left out of the fit.
    #[arg(long, default_value_t = 0.3)]
    pub discard: f64,
}

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct DeviateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sweep: SweepArgs,
    /// Observable: `const` or a spec file (TOML or JSON).
    #[arg(long)]
    pub observable: String,
}

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct HomologyDeviateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Serialize)]
struct FitRecord<'a> {
    index: usize,
    theta: f64,
    #[serde(flatten)]
    fit: &'a ExponentFit,
    truncated: Option<&'a str>,
}

#[derive(Serialize)]
struct DirectionSummary {
    index: usize,
    theta: f64,
    slope: Option<f64>,
    status: String,
    truncated: bool,
}

#[derive(Serialize)]
struct Quantiles {
    min: f64,
    q25: f64,
    median: f64,
    q75: f64,
    max: f64,
}

#[derive(Serialize)]
struct SweepSummary {
    kind: &'static str,
    grid: Grid,
    start: FlowPoint,
    directions: Vec<DirectionSummary>,
    slopes: Option<Quantiles>,
    degenerate: usize,
    singular_truncations: usize,
}

fn sweep(
    args: &SweepArgs,
    kind: &'static str,
    global: &Global,
    rec: &mut Recorder,
    series_for: impl Fn(f64, FlowPoint, &Grid) -> Result<DeviationSeries, DeviationError> + Sync,
    x: FlowPoint,
) -> anyhow::Result<()> {
    let thetas = directions(&args.theta, args.directions, global.seed)?;
    let grid = Grid::reaching(args.t0, args.t_max, args.ratio);
    let policy = WindowPolicy::DiscardFraction { fraction: args.discard };
    let results: Vec<Result<DeviationSeries, DeviationError>> =
        with_jobs(global.jobs, || thetas.par_iter().map(|&th| series_for(th, x, &grid)).collect())?;

    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    let mut degenerate = 0;
    let mut truncations = 0;
    for (i, (theta, res)) in thetas.iter().zip(results).enumerate() {
        let series = res?;
        rec.write(&format!("series_{i:03}.csv"), &series.to_csv())?;
        let truncated = series.truncated.is_some();
        truncations += usize::from(truncated);
        let (slope, status) = match fit_exponent(&series, &policy) {
            Ok(fit) => {
                let record = FitRecord { index: i, theta: *theta, fit: &fit, truncated: series.truncated.as_deref() };
                rec.write_json(&format!("fit_{i:03}.json"), &record)?;
                slopes.push(fit.slope);
                (Some(fit.slope), "ok".to_string())
            }
            Err(DeviationError::DegenerateWindow { .. }) => {
                degenerate += 1;
                (None, "degenerate".to_string())
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(DirectionSummary { index: i, theta: *theta, slope, status, truncated });
    }
    let q = quantiles(&slopes).map(|[min, q25, median, q75, max]| Quantiles { min, q25, median, q75, max });
    for r in &rows {
        match r.slope {
            Some(s) => println!("{:03}  theta {:>10.6}  slope {:.4}{}", r.index, r.theta, s, if r.truncated { "  (truncated)" } else { "" }),
            None => println!("{:03}  theta {:>10.6}  {}", r.index, r.theta, r.status),
        }
    }
    if let Some(q) = &q {
        println!("slopes: min {:.4}  median {:.4}  max {:.4}", q.min, q.median, q.max);
    }
    let summary = SweepSummary {
        kind,
        grid,
        start: x,
        directions: rows,
        slopes: q,
        degenerate,
        singular_truncations: truncations,
    };
    rec.write_json("summary.json", &summary)?;
    Ok(())
}

pub fn run(args: &DeviateArgs, global: &Global, rec: &mut Recorder) -> anyhow::Result<()> {
    let ts = load_surface(rec, &args.sweep.surface, global.tolerances()?)?;
    let f = load_observable(rec, &args.observable, &ts)?;
    let x = start_point(&ts, args.sweep.start.as_deref())?;
    sweep(&args.sweep, "birkhoff", global, rec, |th, x, g| deviation_series(&ts, th, x, &f, g), x)
}

pub fn run_homology(args: &HomologyDeviateArgs, global: &Global, rec: &mut Recorder) -> anyhow::Result<()> {
    let ts = load_surface(rec, &args.sweep.surface, global.tolerances()?)?;
    let x = start_point(&ts, args.sweep.start.as_deref())?;
    sweep(&args.sweep, "homology", global, rec, |th, x, g| homology_deviation_series(&ts, th, x, g), x)
}
