use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use billiards_core::flow::standard_transversal;
use billiards_core::renorm::{direction_exponent, lyapunov_spectrum, LyapunovEstimate, LyapunovOptions, Permutation, DEFAULT_ZORICH_CAP};

use crate::inputs::{directions, load_surface, parse_count, quantiles};
use crate::manifest::Recorder;
use crate::{with_jobs, Global, InputError};

/// Induction and estimator flags.
#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct EstimatorArgs {
    /// Zorich steps per estimate (accepts `1e6`).
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    pub steps: usize,
    /// Tracked directions (defaults to all).
    #[arg(long)]
    pub vectors: Option<usize>,
    /// Zorich steps between re-orthonormalizations.
    #[arg(long, default_value_t = 10)]
    pub reorth: usize,
    /// Batches for the standard errors.
    #[arg(long, default_value_t = 20)]
    pub batches: usize,
    /// Elementary steps allowed in one Zorich step (accepts `1e12`).
    #[arg(long, value_parser = parse_count, default_value = "1e12")]
    #[serde(default = "default_cap")]
    pub zorich_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_ZORICH_CAP as usize
}

impl EstimatorArgs {
    fn options(&self, seed: u64, global: &Global) -> anyhow::Result<LyapunovOptions> {
        Ok(LyapunovOptions {
            n_steps: self.steps,
            n_vectors: self.vectors,
            reorth_every: self.reorth,
            batches: self.batches,
            burn_in: None,
            seed,
            zorich_cap: self.zorich_cap as u64,
            tol: global.tolerances()?,
        })
    }
}

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct LyapunovArgs {
    /// Bottom row over the identity top row, e.g. `4321`.
    #[arg(long)]
    pub perm: Option<String>,
    /// Explicit top row of labels `1..=d`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub top: Vec<usize>,
    /// Explicit bottom row of labels `1..=d`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub bottom: Vec<usize>,
    /// Interval lengths by label (sampled from the seed when absent).
    #[arg(long, value_delimiter = ',')]
    pub lengths: Vec<f64>,
    /// Independent runs with seeds `seed, seed+1, ...`.
    #[arg(long, default_value_t = 1)]
    pub runs: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Serialize)]
struct Report<'a> {
    #[serde(flatten)]
    estimate: &'a LyapunovEstimate,
    gap_holds: bool,
}

fn permutation(args: &LyapunovArgs) -> anyhow::Result<Permutation> {
    let p = match (&args.perm, args.top.is_empty(), args.bottom.is_empty()) {
        (Some(p), true, true) => Permutation::parse(p)?,
        (None, false, false) => {
            let zero_based = |row: &[usize]| -> anyhow::Result<Vec<usize>> {
                row.iter()
                    .map(|&l| l.checked_sub(1).ok_or_else(|| InputError("labels start at 1".into()).into()))
                    .collect()
            };
            Permutation::new(zero_based(&args.top)?, zero_based(&args.bottom)?)?
        }
        _ => return Err(InputError("give either --perm or both --top and --bottom".into()).into()),
    };
    Ok(p)
}

fn describe(e: &LyapunovEstimate) -> String {
    match (e.exponents.get(1), e.stderr.get(1)) {
        (Some(l), Some(s)) => format!(
            "{} {}: lambda_2 = {:.4} +- {:.4}, gap lambda_2 < 1 {}",
            e.permutation,
            e.stratum,
            l,
            s,
            if e.gap_holds() { "holds" } else { "not confirmed" }
        ),
        _ => format!("{}: exponents {:?}", e.permutation, e.exponents),
    }
}

pub fn run(args: &LyapunovArgs, global: &Global, rec: &mut Recorder) -> anyhow::Result<()> {
    let perm = permutation(args)?;
    let lengths = (!args.lengths.is_empty()).then_some(args.lengths.as_slice());
    let runs = args.runs.max(1);
    let options =
        (0..runs).map(|k| args.estimator.options(global.seed + k as u64, global)).collect::<anyhow::Result<Vec<_>>>()?;
    let results: Vec<_> =
        with_jobs(global.jobs, || options.par_iter().map(|o| lyapunov_spectrum(&perm, lengths, o)).collect())?;
    let estimates = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    for (k, e) in estimates.iter().enumerate() {
        let name = if runs == 1 { "lyapunov.json".to_string() } else { format!("lyapunov_{k:03}.json") };
        rec.write_json(&name, &Report { estimate: e, gap_holds: e.gap_holds() })?;
        println!("seed {}: {}", e.seed, describe(e));
    }
    Ok(())
}

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct DirectionExponentArgs {
    /// Surface spec (JSON) or polygon spec (TOML).
    #[arg(long)]
    pub surface: PathBuf,
    /// Explicit directions, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Vec<f64>,
    /// Number of random directions drawn from the seed.
    #[arg(long)]
    pub directions: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Serialize)]
struct DirectionRecord {
    index: usize,
    theta: f64,
    /// Set when the direction was excluded (periodic or degenerate data).
    excluded: Option<String>,
    lambda2: Option<f64>,
    gap_holds: Option<bool>,
    estimate: Option<LyapunovEstimate>,
}

#[derive(Serialize)]
struct DirectionSummary {
    directions: Vec<DirectionRecord>,
    excluded: usize,
    gap_holds: usize,
    lambda2_median: Option<f64>,
}

pub fn run_direction(args: &DirectionExponentArgs, global: &Global, rec: &mut Recorder) -> anyhow::Result<()> {
    let ts = load_surface(rec, &args.surface, global.tolerances()?)?;
    let thetas = directions(&args.theta, args.directions, global.seed)?;
    let opts = args.estimator.options(global.seed, global)?;
    let results: Vec<_> = with_jobs(global.jobs, || {
        thetas
            .par_iter()
            .map(|&th| standard_transversal(&ts, th).and_then(|tr| direction_exponent(&ts, th, &tr, &opts)))
            .collect()
    })?;
    let mut rows = Vec::new();
    let mut l2 = Vec::new();
    for (i, (&theta, r)) in thetas.iter().zip(results).enumerate() {
        let row = match r {
            Ok(e) => {
                let lambda2 = e.exponents.get(1).copied();
                l2.extend(lambda2);
                println!("{i:03}  theta {theta:>10.6}  {}", describe(&e));
                DirectionRecord { index: i, theta, excluded: None, lambda2, gap_holds: Some(e.gap_holds()), estimate: Some(e) }
            }
            Err(err) => {
                println!("{i:03}  theta {theta:>10.6}  excluded: {err}");
                DirectionRecord { index: i, theta, excluded: Some(err.to_string()), lambda2: None, gap_holds: None, estimate: None }
            }
        };
        rows.push(row);
    }
    let summary = DirectionSummary {
        excluded: rows.iter().filter(|r| r.excluded.is_some()).count(),
        gap_holds: rows.iter().filter(|r| r.gap_holds == Some(true)).count(),
        lambda2_median: quantiles(&l2).map(|q| q[2]),
        directions: rows,
    };
    if let Some(m) = summary.lambda2_median {
        println!("median lambda_2 {m:.4}, gap holds in {}/{} directions", summary.gap_holds, thetas.len());
    }
    rec.write_json("direction_exponents.json", &summary)?;
    Ok(())
}
