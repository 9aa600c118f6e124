use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use billiards_core::flow::{birkhoff_integral, homology_class, trace, FlowPoint, HomologyBasis, PieceExit};

use crate::inputs::{load_observable, load_surface, start_point};
use crate::manifest::Recorder;
use crate::Global;

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct TraceArgs {
    /// Surface spec (JSON) or polygon spec (TOML).
    #[arg(long)]
    pub surface: PathBuf,
    /// Flow direction, measured from the vertical.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: f64,
    /// Start point `cell,x,y` (defaults to the centroid of cell 0).
    #[arg(long)]
    pub start: Option<String>,
    /// Trajectory length.
    #[arg(long)]
    pub time: f64,
    /// Observable to integrate along the trajectory (`const` or a spec file).
    #[arg(long)]
    pub observable: Option<String>,
    /// Also write every piece to `pieces.csv`.
    #[arg(long)]
    pub pieces: bool,
}

#[derive(Serialize)]
struct TraceSummary {
    theta: f64,
    start: FlowPoint,
    end: FlowPoint,
    time: f64,
    pieces: usize,
    edge_crossings: usize,
    homology: Vec<i64>,
    birkhoff_integral: Option<f64>,
}

pub fn run(args: &TraceArgs, global: &Global, rec: &mut Recorder) -> anyhow::Result<()> {
    let ts = load_surface(rec, &args.surface, global.tolerances()?)?;
    let x = start_point(&ts, args.start.as_deref())?;
    let f = args.observable.as_deref().map(|o| load_observable(rec, o, &ts)).transpose()?;
    let traj = trace(&ts, x, args.theta, args.time)?;
    let basis = HomologyBasis::new(&ts);
    let summary = TraceSummary {
        theta: args.theta,
        start: x,
        end: traj.end,
        time: args.time,
        pieces: traj.pieces.len(),
        edge_crossings: traj.pieces.iter().filter(|p| !matches!(p.exit, PieceExit::Interior)).count(),
        homology: homology_class(&ts, &basis, &traj).0,
        birkhoff_integral: f.as_ref().map(|f| birkhoff_integral(&traj, f)),
    };
    rec.write_json("trace.json", &summary)?;
    if args.pieces {
        let mut csv = String::from("cell,t0,t1,x0,y0,x1,y1\n");
        for p in &traj.pieces {
            csv.push_str(&format!(
                "{},{:e},{:e},{:e},{:e},{:e},{:e}\n",
                p.cell, p.t0, p.t1, p.start.x, p.start.y, p.end.x, p.end.y
            ));
        }
        rec.write("pieces.csv", &csv)?;
    }
    println!("traced {} pieces, end cell {} at ({}, {})", summary.pieces, traj.end.cell, traj.end.pos.x, traj.end.pos.y);
    Ok(())
}
