use serde::{Deserialize, Serialize};

use super::FlowError;
use crate::linalg::Vec2;
use crate::surface::{Corner, EdgeRef, TranslationSurface};

/// Unit direction of the flow at angle `theta` from the upward vertical.
pub fn direction(theta: f64) -> Vec2 {
    let (s, c) = theta.sin_cos();
    Vec2::new(-s, c)
}

/// A point of the surface given by a cell and coordinates in its frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowPoint {
    pub cell: usize,
    pub pos: Vec2,
}

impl FlowPoint {
    pub fn new(cell: usize, pos: Vec2) -> Self {
        Self { cell, pos }
    }
}

/// Passage through a glued edge pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Crossing {
    pub pair: usize,
    /// `-1` when leaving through the canonical edge of the pair, `+1` when
    /// leaving through its partner.
    pub sign: i8,
    /// Edge the trajectory leaves through.
    pub edge: EdgeRef,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum PieceExit {
    /// The piece ends inside its cell (end of the requested duration).
    Interior,
    Edge(Crossing),
    /// Passage through a regular vertex: arrived in corner `from`, leaves
    /// from corner `to`.
    Vertex { from: Corner, to: Corner },
}

/// A straight sub-segment inside one cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Piece {
    pub cell: usize,
    pub start: Vec2,
    pub end: Vec2,
    pub t0: f64,
    pub t1: f64,
    pub exit: PieceExit,
}

impl Piece {
    pub fn length(&self) -> f64 {
        self.t1 - self.t0
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Entry {
    None,
    Edge(usize),
    Corner(usize),
}

/// Streaming unit-speed straight-line flow.
#[derive(Clone, Debug)]
pub struct Tracer<'a> {
    ts: &'a TranslationSurface,
    u: Vec2,
    cell: usize,
    pos: Vec2,
    entry: Entry,
    time: f64,
    crossings: usize,
    next_audit: usize,
}

const AUDIT_EVERY: usize = 10_000;

impl<'a> Tracer<'a> {
    /// Starts at `x` (inside or on the boundary of its cell) in direction
    /// `θ` from the vertical.
    pub fn new(ts: &'a TranslationSurface, x: FlowPoint, theta: f64) -> Result<Self, FlowError> {
        Self::with_direction(ts, x, direction(theta))
    }

    pub fn with_direction(ts: &'a TranslationSurface, x: FlowPoint, u: Vec2) -> Result<Self, FlowError> {
        if x.cell >= ts.num_cells() {
            return Err(FlowError::InvalidArgument(format!("no cell {}", x.cell)));
        }
        if !(u.norm() > 0.0) {
            return Err(FlowError::InvalidArgument("zero direction".into()));
        }
        let diam = ts.cell_diameter(x.cell);
        let tol = ts.tolerances();
        if !inside_convex(ts.cell(x.cell), x.pos, tol.audit * diam) {
            return Err(FlowError::InvalidArgument(format!("point {:?} is outside cell {}", x.pos, x.cell)));
        }
        for (i, &v) in ts.cell(x.cell).iter().enumerate() {
            if v.dist(x.pos) < tol.singular * diam && ts.classes()[ts.corner_class(x.cell, i)].is_singular() {
                return Err(FlowError::SingularHit { time: 0.0, cell: x.cell });
            }
        }
        Ok(Self {
            ts,
            u: u.normalized(),
            cell: x.cell,
            pos: x.pos,
            entry: Entry::None,
            time: 0.0,
            crossings: 0,
            next_audit: AUDIT_EVERY,
        })
    }

    /// Starts at the vertex of corner `(cell, i)`; `u` must point strictly
    /// into that corner.
    pub fn from_corner(ts: &'a TranslationSurface, corner: Corner, u: Vec2) -> Result<Self, FlowError> {
        let (out, back) = ts.corner_sector(corner.0, corner.1);
        let un = u.normalized();
        if !(out.normalized().cross(un) > 1e-12 && un.cross(back.normalized()) > 1e-12) {
            return Err(FlowError::InvalidArgument("direction does not point into the corner".into()));
        }
        let n = ts.cell(corner.0).len();
        Ok(Self {
            ts,
            u: un,
            cell: corner.0,
            pos: ts.vertex(corner.0, corner.1),
            entry: Entry::Corner(corner.1 % n),
            time: 0.0,
            crossings: 0,
            next_audit: AUDIT_EVERY,
        })
    }

    pub fn direction(&self) -> Vec2 {
        self.u
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn point(&self) -> FlowPoint {
        FlowPoint::new(self.cell, self.pos)
    }

    pub fn num_crossings(&self) -> usize {
        self.crossings
    }

    /// Advances to the next cell boundary, or by `max_len` if that comes
    /// first.
    pub fn next_piece(&mut self, max_len: f64) -> Result<Piece, FlowError> {
        let ts = self.ts;
        let pts = ts.cell(self.cell);
        let n = pts.len();
        let u = self.u;
        let mut best: Option<(f64, usize)> = None;
        for e in 0..n {
            let skip = match self.entry {
                Entry::None => false,
                Entry::Edge(x) => e == x,
                Entry::Corner(k) => e == k || e == (k + n - 1) % n,
            };
            if skip {
                continue;
            }
            let a = pts[e];
            let ev = pts[(e + 1) % n] - a;
            let denom = u.cross(ev);
            if denom <= 0.0 {
                continue;
            }
            let t = ((a - self.pos).cross(ev) / denom).max(0.0);
            if best.is_none_or(|b| t < b.0) {
                best = Some((t, e));
            }
        }
        let (t, e) = best.ok_or_else(|| {
            FlowError::NumericalDrift(format!("no exit from cell {} at {:?}", self.cell, self.pos))
        })?;
        let start = self.pos;
        let t0 = self.time;
        if t > max_len {
            self.pos = start + max_len * u;
            self.time += max_len;
            self.entry = Entry::None;
            return Ok(Piece { cell: self.cell, start, end: self.pos, t0, t1: self.time, exit: PieceExit::Interior });
        }
        let a = pts[e];
        let ev = pts[(e + 1) % n] - a;
        let s = ((a - start).cross(u) / u.cross(ev)).clamp(0.0, 1.0);
        let len = ev.norm();
        let delta = ts.tolerances().singular * ts.cell_diameter(self.cell);
        let near = if s * len < delta {
            Some(e)
        } else if (1.0 - s) * len < delta {
            Some((e + 1) % n)
        } else {
            None
        };
        let cell = self.cell;
        self.time += t;
        if let Some(j) = near {
            let end = pts[j];
            if ts.classes()[ts.corner_class(cell, j)].is_singular() {
                return Err(FlowError::SingularHit { time: self.time, cell });
            }
            let to = self.leave_regular_vertex((cell, j))?;
            self.cell = to.0;
            self.pos = ts.vertex(to.0, to.1);
            self.entry = Entry::Corner(to.1);
            return Ok(Piece { cell, start, end, t0, t1: self.time, exit: PieceExit::Vertex { from: (cell, j), to } });
        }
        let er = EdgeRef::new(cell, e);
        let p = ts.partner(er);
        let pair = ts.edge_pair(er);
        let sign = if ts.pair_edge(pair) == er { -1 } else { 1 };
        let end = a + s * ev;
        self.cell = p.cell;
        self.pos = ts.vertex(p.cell, p.edge) + (1.0 - s) * ts.edge_vector(p);
        self.entry = Entry::Edge(p.edge);
        self.crossings += 1;
        if self.crossings >= self.next_audit {
            self.next_audit += AUDIT_EVERY;
            self.audit()?;
        }
        Ok(Piece { cell, start, end, t0, t1: self.time, exit: PieceExit::Edge(Crossing { pair, sign, edge: er }) })
    }

    /// Corner whose sector contains the flow direction, after arriving at a
    /// regular vertex through corner `from`.
    fn leave_regular_vertex(&self, from: Corner) -> Result<Corner, FlowError> {
        use crate::surface::SectorHit;
        match self.ts.locate_direction(from.0, from.1, self.u) {
            Some(SectorHit::Inside(c)) => Ok(c),
            _ => Err(FlowError::SingularHit { time: self.time, cell: from.0 }),
        }
    }

    fn audit(&self) -> Result<(), FlowError> {
        let tol = self.ts.tolerances().audit * self.ts.cell_diameter(self.cell);
        if !inside_convex(self.ts.cell(self.cell), self.pos, tol) {
            return Err(FlowError::NumericalDrift(format!(
                "position {:?} left cell {} after {} crossings",
                self.pos, self.cell, self.crossings
            )));
        }
        Ok(())
    }

    /// Flows for `duration`, handing each piece to `f`.
    pub fn run(&mut self, duration: f64, mut f: impl FnMut(&Piece)) -> Result<(), FlowError> {
        let end = self.time + duration;
        while self.time < end {
            let remaining = end - self.time;
            let p = self.next_piece(remaining)?;
            f(&p);
            if matches!(p.exit, PieceExit::Interior) {
                break;
            }
        }
        Ok(())
    }
}

fn inside_convex(pts: &[Vec2], p: Vec2, tol: f64) -> bool {
    let n = pts.len();
    (0..n).all(|i| {
        let a = pts[i];
        let ev = pts[(i + 1) % n] - a;
        ev.cross(p - a) >= -tol * ev.norm()
    })
}

/// A traced segment `{φ_t(x) : 0 ≤ t ≤ T}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectorySegment {
    pub start: FlowPoint,
    pub direction: Vec2,
    pub duration: f64,
    pub pieces: Vec<Piece>,
    pub end: FlowPoint,
}

impl TrajectorySegment {
    pub fn crossings(&self) -> impl Iterator<Item = &Crossing> {
        self.pieces.iter().filter_map(|p| match &p.exit {
            PieceExit::Edge(c) => Some(c),
            _ => None,
        })
    }
}

/// Traces the flow in direction `θ` from `x` for time `duration`.
pub fn trace(ts: &TranslationSurface, x: FlowPoint, theta: f64, duration: f64) -> Result<TrajectorySegment, FlowError> {
    if !(duration >= 0.0) {
        return Err(FlowError::InvalidArgument(format!("duration must be nonnegative, got {duration}")));
    }
    let mut tr = Tracer::new(ts, x, theta)?;
    let mut pieces = Vec::new();
    tr.run(duration, |p| pieces.push(*p))?;
    Ok(TrajectorySegment { start: x, direction: tr.direction(), duration, pieces, end: tr.point() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::square_torus;

    #[test]
    fn vertical_wrap_crosses_once() {
        let t = square_torus();
        let seg = trace(&t, FlowPoint::new(0, Vec2::new(0.3, 0.4)), 0.0, 1.0).unwrap();
        let c: Vec<_> = seg.crossings().collect();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].pair, t.edge_pair(EdgeRef::new(0, 2)));
        assert!((seg.end.pos - Vec2::new(0.3, 0.4)).norm() < 1e-12);
        let total: f64 = seg.pieces.iter().map(|p| p.length()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rational_slope_is_periodic() {
        let t = square_torus();
        for (p, q) in [(1i32, 2i32), (2, 3), (3, 1)] {
            // direction (q, p)
            let theta = -(q as f64).atan2(p as f64);
            let u = direction(theta);
            assert!((u.y / u.x - p as f64 / q as f64).abs() < 1e-12);
            let period = ((p * p + q * q) as f64).sqrt();
            let x = FlowPoint::new(0, Vec2::new(0.123, 0.456));
            let seg = trace(&t, x, theta, period).unwrap();
            assert!((seg.end.pos - x.pos).norm() < 1e-9);
            let n = seg.crossings().count();
            assert_eq!(n, (p + q) as usize);
            let twice = trace(&t, x, theta, 2.0 * period).unwrap();
            let a: Vec<_> = twice.crossings().map(|c| (c.pair, c.sign)).collect();
            assert_eq!(a[..n], a[n..]);
        }
    }

    #[test]
    fn concatenation() {
        let t = square_torus();
        let x = FlowPoint::new(0, Vec2::new(0.2, 0.7));
        let th = 0.61;
        let whole = trace(&t, x, th, 7.5).unwrap();
        let a = trace(&t, x, th, 3.2).unwrap();
        let b = trace(&t, a.end, th, 4.3).unwrap();
        let ends = |s: &TrajectorySegment, off: f64| -> Vec<(usize, f64)> {
            s.pieces.iter().filter(|p| !matches!(p.exit, PieceExit::Interior)).map(|p| (p.cell, p.t1 + off)).collect()
        };
        let mut joined = ends(&a, 0.0);
        joined.extend(ends(&b, 3.2));
        let w = ends(&whole, 0.0);
        assert_eq!(w.len(), joined.len());
        for (x, y) in w.iter().zip(&joined) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).abs() < 1e-9);
        }
        assert!((whole.end.pos - b.end.pos).norm() < 1e-9);
    }

    #[test]
    fn deterministic() {
        let t = square_torus();
        let x = FlowPoint::new(0, Vec2::new(0.5, 0.5));
        assert_eq!(trace(&t, x, 0.3, 50.0).unwrap(), trace(&t, x, 0.3, 50.0).unwrap());
    }

    #[test]
    fn rejects_points_outside() {
        let t = square_torus();
        assert!(trace(&t, FlowPoint::new(0, Vec2::new(1.5, 0.5)), 0.1, 1.0).is_err());
    }
}
