use serde::Serialize;

use super::tracer::{direction, FlowPoint, Tracer};
use super::FlowError;
use crate::linalg::Vec2;
use crate::renorm::Iet;
use crate::surface::{Corner, TranslationSurface};

/// Pieces traced before an orbit is declared non-returning.
pub const RETURN_BUDGET: usize = 2_000_000;

/// A straight segment on the surface, starting either at a point or at the
/// vertex of a corner (pointing into that corner).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Transversal {
    pub start: FlowPoint,
    pub corner: Option<Corner>,
    pub vector: Vec2,
}

impl Transversal {
    pub fn from_point(start: FlowPoint, vector: Vec2) -> Self {
        Self { start, corner: None, vector }
    }

    pub fn from_corner(ts: &TranslationSurface, corner: Corner, vector: Vec2) -> Self {
        Self { start: FlowPoint::new(corner.0, ts.vertex(corner.0, corner.1)), corner: Some(corner), vector }
    }

    pub fn length(&self) -> f64 {
        self.vector.norm()
    }
}

#[derive(Clone, Copy, Debug)]
struct Sub {
    cell: usize,
    a: Vec2,
    b: Vec2,
    s0: f64,
    s1: f64,
}

/// The transversal developed cell by cell.
struct Developed {
    subs_by_cell: Vec<Vec<Sub>>,
    subs: Vec<Sub>,
    len: f64,
}

impl Developed {
    fn new(ts: &TranslationSurface, tr: &Transversal) -> Result<Self, FlowError> {
        let len = tr.length();
        if !(len > 0.0) {
            return Err(FlowError::InvalidArgument("transversal has zero length".into()));
        }
        let mut t = match tr.corner {
            Some(c) => Tracer::from_corner(ts, c, tr.vector)?,
            None => Tracer::with_direction(ts, tr.start, tr.vector)?,
        };
        let mut subs = Vec::new();
        t.run(len, |p| {
            if p.t1 > p.t0 {
                subs.push(Sub { cell: p.cell, a: p.start, b: p.end, s0: p.t0, s1: p.t1 })
            }
        })?;
        let mut subs_by_cell = vec![Vec::new(); ts.num_cells()];
        for s in &subs {
            subs_by_cell[s.cell].push(*s);
        }
        Ok(Self { subs_by_cell, subs, len })
    }

    /// Point at parameter `s`.
    fn point(&self, s: f64) -> FlowPoint {
        let sub = self
            .subs
            .iter()
            .find(|x| s <= x.s1)
            .unwrap_or_else(|| self.subs.last().expect("nonempty transversal"));
        let w = if sub.s1 > sub.s0 { ((s - sub.s0) / (sub.s1 - sub.s0)).clamp(0.0, 1.0) } else { 0.0 };
        FlowPoint::new(sub.cell, sub.a + w * (sub.b - sub.a))
    }

    /// First crossing of the transversal by the flow from the tracer's
    /// current state, after time `t_min`: `(parameter, time)`.
    fn first_hit(&self, tracer: &mut Tracer, t_min: f64, budget: usize) -> Result<(f64, f64), FlowError> {
        for _ in 0..budget {
            let p = tracer.next_piece(f64::INFINITY)?;
            let w = p.end - p.start;
            let mut best: Option<(f64, f64)> = None;
            for sub in &self.subs_by_cell[p.cell] {
                let d = sub.b - sub.a;
                let denom = w.cross(d);
                if denom.abs() <= 1e-14 * w.norm() * d.norm() {
                    continue;
                }
                let r = sub.a - p.start;
                let t = r.cross(d) / denom;
                let s = r.cross(w) / denom;
                let eps = 1e-12;
                if !(-eps..=1.0 + eps).contains(&t) || !(-eps..=1.0 + eps).contains(&s) {
                    continue;
                }
                let time = p.t0 + t.clamp(0.0, 1.0) * (p.t1 - p.t0);
                if time <= t_min {
                    continue;
                }
                let param = sub.s0 + s.clamp(0.0, 1.0) * (sub.s1 - sub.s0);
                if best.is_none_or(|b| time < b.1) {
                    best = Some((param, time));
                }
            }
            if let Some(h) = best {
                return Ok(h);
            }
        }
        Err(FlowError::NonReturning { budget })
    }
}

/// First-return map of the flow to a transversal.
#[derive(Clone, Debug, Serialize)]
pub struct ReturnMap {
    pub iet: Iet,
    /// Return time of each interval, in top order.
    pub return_times: Vec<f64>,
    /// Interior discontinuities along the transversal.
    pub breakpoints: Vec<f64>,
    pub length: f64,
}

/// Interval exchange induced by the flow in direction `θ` on the
/// transversal. Discontinuities are the first backward hits of every
/// incoming separatrix and of the transversal's endpoints (a corner start is
/// already covered by the separatrices).
pub fn first_return_iet(ts: &TranslationSurface, theta: f64, tr: &Transversal) -> Result<ReturnMap, FlowError> {
    let u = direction(theta);
    let dev = Developed::new(ts, tr)?;
    let l = dev.len;
    if tr.vector.normalized().cross(u).abs() < 1e-9 {
        return Err(FlowError::InvalidArgument("transversal is parallel to the flow".into()));
    }
    let t_min = 1e-12 * ts.max_cell_diameter();
    let mut cuts = separatrix_hits(ts, u, &dev, t_min)?;
    let mut ends = vec![l];
    if tr.corner.is_none() {
        ends.push(0.0);
    }
    for s in ends {
        let mut t = Tracer::with_direction(ts, dev.point(s), -u)?;
        cuts.push(dev.first_hit(&mut t, t_min, RETURN_BUDGET)?.0);
    }
    let merge = 1e-9 * l;
    cuts.retain(|&s| s > merge && s < l - merge);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= merge);

    let mut bounds = vec![0.0];
    bounds.extend(&cuts);
    bounds.push(l);
    let d = bounds.len() - 1;
    let mut images = Vec::with_capacity(d);
    let mut times = Vec::with_capacity(d);
    for k in 0..d {
        let (a, b) = (bounds[k], bounds[k + 1]);
        let mid = 0.5 * (a + b);
        let mut t = Tracer::with_direction(ts, dev.point(mid), u)?;
        let (s, time) = dev.first_hit(&mut t, t_min, RETURN_BUDGET)?;
        images.push(s - (mid - a));
        times.push(time);
    }
    let mut bottom: Vec<usize> = (0..d).collect();
    bottom.sort_by(|&i, &j| images[i].total_cmp(&images[j]));
    let lengths: Vec<f64> = (0..d).map(|k| bounds[k + 1] - bounds[k]).collect();
    // images must tile the transversal
    let mut pos = 0.0;
    for &k in &bottom {
        if (images[k] - pos).abs() > 1e-7 * l.max(1.0) {
            return Err(FlowError::NumericalDrift(format!(
                "return images do not tile the transversal: interval {k} lands at {} instead of {pos}",
                images[k]
            )));
        }
        pos += lengths[k];
    }
    let top: Vec<usize> = (0..d).collect();
    let iet = Iet::from_f64(top, bottom, &lengths)?;
    Ok(ReturnMap { iet, return_times: times, breakpoints: cuts, length: l })
}

/// Backward first hits of all incoming separatrices.
fn separatrix_hits(ts: &TranslationSurface, u: Vec2, dev: &Developed, t_min: f64) -> Result<Vec<f64>, FlowError> {
    let mut hits = Vec::new();
    for class in ts.classes().iter().filter(|c| c.is_singular()) {
        for &corner in &class.corners {
            let (out, back) = ts.corner_sector(corner.0, corner.1);
            let w = -u;
            let (o, b) = (out.normalized(), back.normalized());
            if o.cross(w).abs() < 1e-12 && o.dot(w) > 0.0 {
                // separatrix along an edge: a saddle connection in this direction
                return Err(FlowError::SingularHit { time: 0.0, cell: corner.0 });
            }
            if o.cross(w) > 0.0 && w.cross(b) > 0.0 {
                let mut t = Tracer::from_corner(ts, corner, w)?;
                hits.push(dev.first_hit(&mut t, t_min, RETURN_BUDGET)?.0);
            }
        }
    }
    Ok(hits)
}

/// Transversal from a cone-point corner in direction `dir`, cut at the
/// farthest first separatrix hit within `max_len`. Its return map has the
/// minimal number `2g + s - 1` of intervals.
pub fn separatrix_transversal(
    ts: &TranslationSurface,
    theta: f64,
    corner: Corner,
    dir: Vec2,
    max_len: f64,
) -> Result<Transversal, FlowError> {
    let u = direction(theta);
    let probe = Transversal::from_corner(ts, corner, dir.normalized().scale(max_len));
    let dev = Developed::new(ts, &probe)?;
    let t_min = 1e-12 * ts.max_cell_diameter();
    let hits = separatrix_hits(ts, u, &dev, t_min)?;
    let s = hits
        .into_iter()
        .filter(|&s| s > 1e-9 * max_len && s < max_len * (1.0 - 1e-9))
        .fold(f64::NAN, f64::max);
    if s.is_nan() {
        return Err(FlowError::NonReturning { budget: RETURN_BUDGET });
    }
    Ok(Transversal::from_corner(ts, corner, dir.normalized().scale(s)))
}

/// A transversal perpendicular to the flow in direction `θ`: the trimmed
/// separatrix transversal from the first cone-point corner containing the
/// perpendicular, or, on surfaces without cone points, a segment of length
/// one diameter from the centroid of cell 0.
pub fn standard_transversal(ts: &TranslationSurface, theta: f64) -> Result<Transversal, FlowError> {
    let u = direction(theta);
    let dir = Vec2::new(u.y, -u.x);
    let corner = ts.classes().iter().filter(|c| c.is_singular()).flat_map(|c| c.corners.iter().copied()).find(|c| {
        let (o, b) = ts.corner_sector(c.0, c.1);
        o.cross(dir) > 0.0 && dir.cross(b) > 0.0
    });
    let diam = ts.max_cell_diameter();
    match corner {
        Some(c) => {
            let mut len = 3.0 * diam;
            loop {
                match separatrix_transversal(ts, theta, c, dir, len) {
                    Err(FlowError::NonReturning { .. }) if len < 1e3 * diam => len *= 4.0,
                    r => return r,
                }
            }
        }
        None => {
            let cell = ts.cell(0);
            let c = cell.iter().fold(Vec2::ZERO, |a, &p| a + p).scale(1.0 / cell.len() as f64);
            Ok(Transversal::from_point(FlowPoint::new(0, c), dir.scale(diam)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_polygon_from_angles, unfold};
    use crate::surface::square_torus;
    use num_rational::Rational64;

    fn octagon_surface() -> TranslationSurface {
        let a = [Rational64::new(1, 8), Rational64::new(3, 8), Rational64::new(1, 2)];
        unfold(&make_polygon_from_angles(&a, 1.0, None).unwrap()).unwrap()
    }

    /// A corner of a cone point whose sector strictly contains `dir`.
    fn singular_corner(ts: &TranslationSurface, dir: Vec2) -> Corner {
        for class in ts.classes().iter().filter(|c| c.is_singular()) {
            for &c in &class.corners {
                let (o, b) = ts.corner_sector(c.0, c.1);
                if o.cross(dir) > 1e-9 && dir.cross(b) > 1e-9 {
                    return c;
                }
            }
        }
        panic!("no corner contains the direction");
    }

    #[test]
    fn torus_circle_gives_rotation() {
        let ts = square_torus();
        let beta: f64 = (5f64.sqrt() - 1.0) / 2.0;
        let theta = -beta.atan();
        let tr = Transversal::from_point(FlowPoint::new(0, Vec2::new(0.3, 0.5)), Vec2::new(1.0, 0.0));
        let map = first_return_iet(&ts, theta, &tr).unwrap();
        assert_eq!(map.iet.permutation().bottom, vec![1, 0]);
        let l = map.iet.lengths();
        assert!((l[0] - (1.0 - beta)).abs() < 1e-9, "{l:?}");
        assert!((l[1] - beta).abs() < 1e-9);
        let h = (1.0 + beta * beta).sqrt();
        assert!(map.return_times.iter().all(|t| (t - h).abs() < 1e-9));
    }

    #[test]
    fn octagon_separatrix_transversal_is_minimal() {
        let ts = octagon_surface();
        for theta in [0.4123, 1.234, 2.718, -0.77] {
            let u = direction(theta);
            let dir = Vec2::new(u.y, -u.x);
            let corner = singular_corner(&ts, dir);
            let tr = separatrix_transversal(&ts, theta, corner, dir, 3.0 * ts.max_cell_diameter()).unwrap();
            let map = first_return_iet(&ts, theta, &tr).unwrap();
            // genus 2, one cone point
            assert_eq!(map.iet.len(), 4, "θ = {theta}");
            assert!((map.iet.total() - tr.length()).abs() < 1e-9);
        }
    }

    #[test]
    fn iet_matches_traced_returns() {
        let ts = octagon_surface();
        let theta = 0.4123;
        let u = direction(theta);
        let dir = Vec2::new(u.y, -u.x);
        let corner = singular_corner(&ts, dir);
        let tr = separatrix_transversal(&ts, theta, corner, dir, 3.0 * ts.max_cell_diameter()).unwrap();
        let map = first_return_iet(&ts, theta, &tr).unwrap();
        let dev = Developed::new(&ts, &tr).unwrap();
        let t_min = 1e-12 * ts.max_cell_diameter();
        for k in 1..20 {
            let s = map.length * (k as f64 / 20.0 + 0.0123);
            if s >= map.length {
                continue;
            }
            let mut t = Tracer::with_direction(&ts, dev.point(s), u).unwrap();
            let (hit, _) = dev.first_hit(&mut t, t_min, RETURN_BUDGET).unwrap();
            assert!((hit - map.iet.map(s)).abs() < 1e-8, "s = {s}: traced {hit}, iet {}", map.iet.map(s));
        }
    }

    #[test]
    fn parallel_transversal_rejected() {
        let ts = square_torus();
        let tr = Transversal::from_point(FlowPoint::new(0, Vec2::new(0.3, 0.5)), Vec2::new(0.0, 1.0));
        assert!(first_return_iet(&ts, 0.0, &tr).is_err());
    }
}
