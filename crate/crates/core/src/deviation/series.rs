use serde::{Deserialize, Serialize};

use super::DeviationError;
use crate::flow::{
    add_crossings, area_integral, direction, FlowError, FlowPoint, HomologyBasis, Observable, Piece, Tracer,
    PIECE_ORDER,
};
use crate::surface::TranslationSurface;

/// Relative round-off level of a traced ergodic integral, per unit time.
const BIRKHOFF_NOISE: f64 = 1e-11;

/// Geometric time grid `T_j = t0·ratio^j`, `j < count`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub t0: f64,
    pub ratio: f64,
    pub count: usize,
}

impl Grid {
    pub const DEFAULT_RATIO: f64 = 1.25;

    /// Grid from `t0` with enough points to reach `t_max`.
    pub fn reaching(t0: f64, t_max: f64, ratio: f64) -> Self {
        let count = ((t_max / t0).ln() / ratio.ln() * (1.0 + 1e-12)).floor() as usize + 1;
        Self { t0, ratio, count }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.count).map(|j| self.t0 * self.ratio.powi(j as i32)).collect()
    }

    fn validate(&self) -> Result<(), DeviationError> {
        if !(self.t0 > 0.0 && self.ratio > 1.0 && self.count > 0) {
            return Err(DeviationError::InvalidInput("grid needs t0 > 0, ratio > 1 and count > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Birkhoff,
    Homology,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointFlag {
    Ok,
    /// The deviation is zero up to round-off and has no meaningful logarithm.
    Zero,
    /// Last point before the trajectory hit a cone point.
    Truncated,
}

impl PointFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            PointFlag::Ok => "ok",
            PointFlag::Zero => "zero",
            PointFlag::Truncated => "truncated",
        }
    }
}

/// Deviation of a trajectory statistic from its linear prediction, sampled
/// on a time grid.
#[derive(Clone, Debug, Serialize)]
pub struct DeviationSeries {
    pub kind: SeriesKind,
    pub theta: f64,
    pub start: FlowPoint,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub flags: Vec<PointFlag>,
    /// Reason the series stops before the end of the grid.
    pub truncated: Option<String>,
    /// Free-form description of the surface and observable.
    pub label: Option<String>,
}

impl DeviationSeries {
    fn new(kind: SeriesKind, theta: f64, start: FlowPoint) -> Self {
        Self {
            kind,
            theta,
            start,
            times: Vec::new(),
            values: Vec::new(),
            flags: Vec::new(),
            truncated: None,
            label: None,
        }
    }

    /// Records `d`, flagged as zero when it does not exceed `floor`.
    fn push(&mut self, t: f64, d: f64, floor: f64) {
        self.times.push(t);
        self.values.push(d);
        self.flags.push(if d > floor { PointFlag::Ok } else { PointFlag::Zero });
    }

    fn truncate(&mut self, err: FlowError) {
        if let Some(f) = self.flags.last_mut() {
            *f = PointFlag::Truncated;
        }
        self.truncated = Some(err.to_string());
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV with columns `T,D,logT,logD,flag`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,D,logT,logD,flag\n");
        for ((t, d), f) in self.times.iter().zip(&self.values).zip(&self.flags) {
            out.push_str(&format!("{t:e},{d:e},{:.12},{:.12},{}\n", t.ln(), d.ln(), f.as_str()));
        }
        out
    }
}

/// Traces from `x` and calls `at_checkpoint` whenever the trajectory time
/// reaches the next grid time. A cone-point hit ends the series early.
fn checkpoints(
    ts: &TranslationSurface,
    x: FlowPoint,
    theta: f64,
    grid: &Grid,
    series: &mut DeviationSeries,
    mut on_piece: impl FnMut(&Piece),
    mut at_checkpoint: impl FnMut(f64) -> f64,
    noise: f64,
) -> Result<(), DeviationError> {
    grid.validate()?;
    let mut tracer = Tracer::new(ts, x, theta)?;
    for t in grid.times() {
        loop {
            let rem = t - tracer.time();
            if rem <= 1e-13 * t {
                break;
            }
            match tracer.next_piece(rem) {
                Ok(p) => on_piece(&p),
                Err(e @ FlowError::SingularHit { .. }) => {
                    series.truncate(e);
                    return Ok(());
                }
                Err(e) => return Err(e.into()),
            }
        }
        let d = at_checkpoint(t);
        series.push(t, d, noise * t);
    }
    Ok(())
}

/// `D_j = |∫_0^{T_j} f(φ_t x) dt - T_j·mean(f)|` from a single trace.
pub fn deviation_series(
    ts: &TranslationSurface,
    theta: f64,
    x: FlowPoint,
    f: &Observable,
    grid: &Grid,
) -> Result<DeviationSeries, DeviationError> {
    let mean = area_integral(ts, f) / ts.area();
    let mut series = DeviationSeries::new(SeriesKind::Birkhoff, theta, x);
    let acc = std::cell::Cell::new(0.0);
    let mut comp = 0.0;
    checkpoints(
        ts,
        x,
        theta,
        grid,
        &mut series,
        |p| {
            // compensated sum: millions of pieces
            let y = f.line_integral(p.cell, p.start, p.end, PIECE_ORDER) - comp;
            let s = acc.get() + y;
            comp = (s - acc.get()) - y;
            acc.set(s);
        },
        |t| (acc.get() - t * mean).abs(),
        BIRKHOFF_NOISE * (1.0 + mean.abs()),
    )?;
    Ok(series)
}

/// `D_j = |h(T_j) - T_j·h_θ|`, the distance between the homology class of
/// the trajectory (closed through the dual tree) and the asymptotic cycle,
/// in the tree–cotree basis.
pub fn homology_deviation_series(
    ts: &TranslationSurface,
    theta: f64,
    x: FlowPoint,
    grid: &Grid,
) -> Result<DeviationSeries, DeviationError> {
    let basis = HomologyBasis::new(ts);
    let cycle = basis.asymptotic_cycle(ts, direction(theta));
    let mut series = DeviationSeries::new(SeriesKind::Homology, theta, x);
    // signed crossings per edge pair, shared by both callbacks
    let acc = std::cell::RefCell::new(vec![0i64; ts.num_edge_pairs()]);
    checkpoints(
        ts,
        x,
        theta,
        grid,
        &mut series,
        |p| add_crossings(ts, p, &mut acc.borrow_mut()),
        |t| {
            let h = basis.coords(&acc.borrow());
            h.0.iter().zip(&cycle).map(|(&a, &c)| (a as f64 - t * c).powi(2)).sum::<f64>().sqrt()
        },
        0.0,
    )?;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{ObservableSpec, Term};
    use crate::linalg::Vec2;
    use crate::surface::square_torus;

    fn golden_theta() -> f64 {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        -(1.0 / phi).atan()
    }

    fn start() -> FlowPoint {
        FlowPoint::new(0, Vec2::new(0.123, 0.456))
    }

    fn trig() -> Observable {
        let spec = ObservableSpec::Trig { coeffs: vec![[1.0, 0.0, 1.0, 1.0], [1.0, 1.0, 0.5, 0.0]], cells: None };
        let trig = Observable::from_spec(&spec, &square_torus()).unwrap();
        let mut terms = trig.terms().to_vec();
        terms.push(Term::Constant(0.7));
        Observable::new(terms)
    }

    #[test]
    fn grid_reaches_t_max() {
        let g = Grid::reaching(10.0, 1e6, 1.25);
        let t = g.times();
        assert!(*t.last().unwrap() <= 1e6 * (1.0 + 1e-9));
        assert!(t.last().unwrap() * 1.25 > 1e6);
    }

    #[test]
    fn constant_has_no_deviation() {
        let ts = square_torus();
        let s =
            deviation_series(&ts, golden_theta(), start(), &Observable::constant(1.0), &Grid::reaching(1.0, 1e4, 1.25))
                .unwrap();
        assert!(s.values.iter().all(|&d| d < 1e-8), "{:?}", s.values);
    }

    #[test]
    fn torus_deviation_is_logarithmic() {
        let ts = square_torus();
        let f = trig().mean_zero(&ts);
        let s = deviation_series(&ts, golden_theta(), start(), &f, &Grid::reaching(10.0, 1e5, 1.25)).unwrap();
        let max_ratio = s.times.iter().zip(&s.values).map(|(t, d)| d / t.ln()).fold(0.0, f64::max);
        assert!(max_ratio < 5.0, "{max_ratio}");
    }

    #[test]
    fn mean_zero_matches_subtracting_the_mean() {
        let ts = square_torus();
        let f = trig();
        let mean = area_integral(&ts, &f) / ts.area();
        let mut terms = f.terms().to_vec();
        terms.push(Term::Constant(-mean));
        let shifted = Observable::new(terms);
        let g = Grid::reaching(1.0, 1e3, 1.25);
        let a = deviation_series(&ts, 0.37, start(), &f.clone().mean_zero(&ts), &g).unwrap();
        let b = deviation_series(&ts, 0.37, start(), &shifted, &g).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn torus_homology_deviation_bounded() {
        let ts = square_torus();
        let s = homology_deviation_series(&ts, golden_theta(), start(), &Grid::reaching(1.0, 1e5, 1.25)).unwrap();
        assert!(s.values.iter().all(|&d| d < 3.0), "{:?}", s.values);
    }

    #[test]
    fn rational_direction_is_periodic() {
        let ts = square_torus();
        // direction (1, 1): period sqrt(2)
        let theta = -std::f64::consts::FRAC_PI_4;
        let g = Grid { t0: 2f64.sqrt(), ratio: 2.0, count: 10 };
        let s = homology_deviation_series(&ts, theta, start(), &g).unwrap();
        for d in &s.values {
            assert!((d - s.values[0]).abs() < 1e-9, "{:?}", s.values);
        }
    }

    #[test]
    fn csv_layout() {
        let ts = square_torus();
        let s = homology_deviation_series(&ts, 0.3, start(), &Grid { t0: 1.0, ratio: 2.0, count: 3 }).unwrap();
        let csv = s.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "T,D,logT,logD,flag");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].split(',').count() == 5);
    }
}
