use std::path::PathBuf;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use billiards_core::deviation::{decompose, sampling_times, verify_sampling_conditions, SamplingParams};
use billiards_core::surface::systole_series;

use crate::inputs::load_surface;
use crate::manifest::Recorder;
use crate::{Global, InputError};

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct DecomposeArgs {
    /// Total time to decompose.
    #[arg(long)]
    pub t: f64,
    /// Nondecreasing segment lengths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub seq: Vec<f64>,
    /// Schedule file from `sample-times`; lengths are `exp(s_k)`.
    #[arg(long)]
    pub schedule: Option<PathBuf>,
}

pub fn run_decompose(args: &DecomposeArgs, _global: &Global, rec: &mut Recorder) -> anyhow::Result<()> {
    let seq = match (&args.schedule, args.seq.is_empty()) {
        (Some(path), true) => {
            let text = rec.read_input(path)?;
            let v: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let times = v["times"]
                .as_array()
                .ok_or_else(|| InputError(format!("{} has no times array", path.display())))?;
            times
                .iter()
                .map(|t| t.as_f64().map(f64::exp).ok_or_else(|| InputError("schedule times must be numbers".into())))
                .collect::<Result<Vec<_>, _>>()?
        }
        (None, false) => args.seq.clone(),
        _ => return Err(InputError("give either --seq or --schedule".into()).into()),
    };
    let d = decompose(args.t, &seq)?;
    rec.write_json("decomposition.json", &d)?;
    println!("n = {}, m = {:?}, tau = {}, T_y = {}", d.n, d.m, d.tau, d.t_y);
    Ok(())
}

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct SampleTimesArgs {
    /// Surface spec (JSON) or polygon spec (TOML).
    #[arg(long)]
    pub surface: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: f64,
    /// Last orbit time considered.
    #[arg(long)]
    pub horizon: f64,
    /// Systole floor for re-entry (the deeper compact set).
    #[arg(long)]
    pub deep: f64,
    /// Systole floor every emitted time satisfies.
    #[arg(long)]
    pub floor: f64,
    /// Minimum spacing of emitted times.
    #[arg(long)]
    pub step: f64,
    /// Neighborhood width for nearby directions.
    #[arg(long, default_value_t = 0.1)]
    pub d_proxy: f64,
    /// Scan step while waiting for re-entry (defaults to step/10).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Nearby directions checked per candidate.
    #[arg(long, default_value_t = 8)]
    pub neighbors: usize,
    /// Exponential rate of the neighborhood shrinkage.
    #[arg(long, default_value_t = 2.0)]
    pub rate: f64,
    /// Spacing-condition parameters to report.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1")]
    pub eps: Vec<f64>,
    /// Exponential-sum parameters to report.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1")]
    pub lambda: Vec<f64>,
}

pub fn run_sample_times(args: &SampleTimesArgs, global: &Global, rec: &mut Recorder) -> anyhow::Result<()> {
    let ts = load_surface(rec, &args.surface, global.tolerances()?)?;
    let params = SamplingParams {
        deep_systole: args.deep,
        systole_floor: args.floor,
        step: args.step,
        d_proxy: args.d_proxy,
        dt: args.dt.unwrap_or(args.step / 10.0),
        neighbors: args.neighbors,
        rate: args.rate,
    };
    let schedule = sampling_times(&ts, args.theta, args.horizon, &params)?;
    let report = verify_sampling_conditions(&schedule.times, &args.eps, &args.lambda);
    rec.write_json("schedule.json", &schedule)?;
    rec.write_json("conditions.json", &report)?;
    println!(
        "{} sampling times up to {}{}",
        schedule.times.len(),
        schedule.times.last().copied().unwrap_or(0.0),
        if schedule.horizon_exhausted { " (horizon exhausted before re-entry)" } else { "" }
    );
    for g in &report.gaps {
        match g.holds_from {
            Some(n) => println!("spacing condition eps={} holds from n={n}", g.eps),
            None => println!("spacing condition eps={} fails within the horizon", g.eps),
        }
    }
    for s in &report.sums {
        println!("K_lambda lambda={}: {}", s.lambda, s.k);
    }
    Ok(())
}

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct SystoleScanArgs {
    /// Surface spec (JSON) or polygon spec (TOML).
    #[arg(long)]
    pub surface: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: f64,
    /// Orbit horizon.
    #[arg(long)]
    pub t_max: f64,
    /// Sampling step.
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    /// Systole thresholds for recurrence fractions.
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
    pub eps: Vec<f64>,
}

#[derive(Serialize)]
struct Fraction {
    eps: f64,
    fraction: f64,
}

pub fn run_systole_scan(args: &SystoleScanArgs, global: &Global, rec: &mut Recorder) -> anyhow::Result<()> {
    let ts = load_surface(rec, &args.surface, global.tolerances()?)?;
    let series = crate::with_jobs(global.jobs, || systole_series(&ts, args.theta, args.t_max, args.dt))??;
    let mut csv = String::from("t,systole\n");
    for (t, s) in &series {
        csv.push_str(&format!("{t:e},{s:e}\n"));
    }
    rec.write("systole.csv", &csv)?;
    let fractions: Vec<Fraction> = args
        .eps
        .iter()
        .map(|&eps| {
            let below = series.iter().filter(|&&(_, s)| s < eps).count();
            Fraction { eps, fraction: (below as f64 * args.dt / args.t_max).min(1.0) }
        })
        .collect();
    for f in &fractions {
        println!("eps {}: recurrence fraction {}", f.eps, f.fraction);
    }
    rec.write_json("recurrence.json", &fractions)?;
    Ok(())
}
