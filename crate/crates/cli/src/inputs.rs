use std::path::Path;

use anyhow::Context;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use billiards_core::flow::{FlowPoint, Observable, ObservableSpec};
use billiards_core::geometry::{unfold_with, PolygonSpec};
use billiards_core::linalg::polygon_area;
use billiards_core::surface::{SurfaceSpec, TranslationSurface};
use billiards_core::{Tolerances, Vec2};

use crate::manifest::Recorder;
use crate::InputError;

/// Stream ids keep independent random draws apart under one seed.
pub const STREAM_DIRECTIONS: u64 = 1;

fn is_toml(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "toml")
}

pub fn read_polygon(rec: &mut Recorder, path: &Path) -> anyhow::Result<PolygonSpec> {
    let text = rec.read_input(path)?;
    let spec: PolygonSpec = if is_toml(path) {
        toml::from_str(&text).with_context(|| format!("parsing polygon spec {}", path.display()))?
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing polygon spec {}", path.display()))?
    };
    Ok(spec)
}

/// A surface file (JSON surface spec) or a polygon spec (TOML) to unfold.
pub fn load_surface(rec: &mut Recorder, path: &Path, tol: Tolerances) -> anyhow::Result<TranslationSurface> {
    if is_toml(path) {
        let spec = read_polygon(rec, path)?;
        let p = spec.build().with_context(|| format!("in polygon spec {}", path.display()))?;
        return unfold_with(&p, tol).with_context(|| format!("unfolding {}", path.display()));
    }
    let text = rec.read_input(path)?;
    let spec: SurfaceSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing surface spec {}", path.display()))?;
    spec.to_surface(tol).with_context(|| format!("in surface spec {}", path.display()))
}

/// `const` for the constant function 1, otherwise an observable spec file.
pub fn load_observable(rec: &mut Recorder, spec: &str, ts: &TranslationSurface) -> anyhow::Result<Observable> {
    if spec == "const" {
        return Ok(Observable::constant(1.0));
    }
    let path = Path::new(spec);
    let text = rec.read_input(path)?;
    let parsed: ObservableSpec = if is_toml(path) {
        toml::from_str(&text).with_context(|| format!("parsing observable spec {spec}"))?
    } else {
        serde_json::from_str(&text).with_context(|| format!("parsing observable spec {spec}"))?
    };
    Observable::from_spec(&parsed, ts).with_context(|| format!("in observable spec {spec}"))
}

/// Parses counts written as integers or in exponent form (`1e6`).
pub fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(n) = s.parse::<usize>() {
        return Ok(n);
    }
    match s.parse::<f64>() {
        Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1e18 => Ok(x as usize),
        _ => Err(format!("{s:?} is not a nonnegative integer")),
    }
}

/// Explicit directions, or `count` directions uniform in `[0, 2π)` drawn
/// from the run seed.
pub fn directions(thetas: &[f64], count: Option<usize>, seed: u64) -> anyhow::Result<Vec<f64>> {
    match (thetas.is_empty(), count) {
        (false, None) => Ok(thetas.to_vec()),
        (true, Some(n)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(STREAM_DIRECTIONS);
            Ok((0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect())
        }
        _ => Err(InputError("give either --theta or --directions".into()).into()),
    }
}

/// `cell,x,y`, or the centroid of cell 0.
pub fn start_point(ts: &TranslationSurface, start: Option<&str>) -> anyhow::Result<FlowPoint> {
    let Some(s) = start else {
        let cell = ts.cell(0);
        let a = polygon_area(cell);
        let mut c = Vec2::ZERO;
        let n = cell.len();
        for i in 0..n {
            let (p, q) = (cell[i], cell[(i + 1) % n]);
            c = c + (p.cross(q) / (6.0 * a)) * (p + q);
        }
        return Ok(FlowPoint::new(0, c));
    };
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || InputError(format!("start point {s:?} must be cell,x,y"));
    if parts.len() != 3 {
        return Err(bad().into());
    }
    let cell: usize = parts[0].parse().map_err(|_| bad())?;
    let x: f64 = parts[1].parse().map_err(|_| bad())?;
    let y: f64 = parts[2].parse().map_err(|_| bad())?;
    if cell >= ts.num_cells() {
        return Err(InputError(format!("start cell {cell} out of range")).into());
    }
    Ok(FlowPoint::new(cell, Vec2::new(x, y)))
}

pub fn quantiles(values: &[f64]) -> Option<[f64; 5]> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let x = p * (v.len() - 1) as f64;
        let (i, f) = (x.floor() as usize, x.fract());
        if i + 1 < v.len() {
            v[i] * (1.0 - f) + v[i + 1] * f
        } else {
            v[i]
        }
    };
    Some([q(0.0), q(0.25), q(0.5), q(0.75), q(1.0)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("250"), Ok(250));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }

    #[test]
    fn seeded_directions_are_stable() {
        let a = directions(&[], Some(5), 42).unwrap();
        assert_eq!(a, directions(&[], Some(5), 42).unwrap());
        assert_ne!(a, directions(&[], Some(5), 43).unwrap());
        assert!(directions(&[0.1], Some(5), 0).is_err());
    }

    #[test]
    fn quantile_values() {
        let q = quantiles(&[3.0, 1.0, 2.0, 4.0, 5.0]).unwrap();
        assert_eq!(q, [1.0, 2.0, 3.0, 4.0, 5.0]);
    }
}
