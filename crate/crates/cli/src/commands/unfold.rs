use std::path::PathBuf;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use billiards_core::geometry::{reflection_group, stratum, unfold_with};
use billiards_core::surface::SurfaceSpec;

use crate::inputs::read_polygon;
use crate::manifest::Recorder;
use crate::Global;

#[derive(Clone, Debug, clap::Args, Serialize, Deserialize)]
pub struct UnfoldArgs {
    /// Polygon spec (TOML or JSON) with exact vertices or angles.
    pub polygon: PathBuf,
    /// Surface file name inside the output directory.
    #[arg(long, default_value = "surface.json")]
    pub out: String,
}

#[derive(Serialize)]
struct Summary {
    genus: usize,
    zero_orders: Vec<usize>,
    stratum: String,
    group_order: usize,
    cells: usize,
    polygon_area: f64,
    area: f64,
}

pub fn run(args: &UnfoldArgs, global: &Global, rec: &mut Recorder) -> anyhow::Result<()> {
    let tol = global.tolerances()?;
    let spec = read_polygon(rec, &args.polygon)?;
    let where_ = || format!("in polygon spec {}", args.polygon.display());
    let polygon = spec.build().with_context(where_)?;
    let ts = unfold_with(&polygon, tol).with_context(where_)?;
    let s = stratum(&ts).with_context(where_)?;
    let group = reflection_group(&polygon);
    rec.write_json(&args.out, &SurfaceSpec::from_surface(&ts))?;
    let summary = Summary {
        genus: s.genus,
        zero_orders: s.zero_orders.clone(),
        stratum: s.to_string(),
        group_order: group.order(),
        cells: ts.num_cells(),
        polygon_area: polygon.area(),
        area: ts.area(),
    };
    rec.write_json("unfold_summary.json", &summary)?;
    println!("genus {}, {}, |G|={}, area {}", s.genus, s, group.order(), ts.area());
    Ok(())
}
