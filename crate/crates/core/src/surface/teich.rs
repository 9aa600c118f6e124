//! Following a surface along the Teichmüller geodesic `t ↦ g_t r_θ S`.
//!
//! Applying `g_t` to the original cells for large `t` produces extremely thin
//! cells, so instead the surface is kept as a triangulation whose edge
//! vectors are flowed and which is restored to a Delaunay triangulation by
//! edge flips after every small step. Edge vectors are stored as integer
//! combinations of a basis of edges so every triangle closes exactly.

use rayon::prelude::*;
use std::collections::VecDeque;

use super::{saddle::systole_with_budget, saddle::DEFAULT_NODE_BUDGET, EdgeRef, SurfaceError, TranslationSurface};
use crate::linalg::{Mat2, Vec2};
use crate::tol::Tolerances;

const MAX_SUBSTEP: f64 = 0.25;

/// A side of an edge: `(edge id, +1 | -1)`.
type Side = (usize, i8);

#[derive(Clone, Debug)]
pub struct TeichmullerOrbit {
    /// Counterclockwise edges of each triangle.
    tris: Vec<[Side; 3]>,
    /// Class (in the starting surface) of the corner at the start of each edge.
    corner: Vec<[usize; 3]>,
    /// `(triangle, slot)` of the positive and negative side of each edge.
    sides: Vec<[(usize, usize); 2]>,
    coeffs: Vec<Vec<i64>>,
    basis: Vec<Vec2>,
    marked_classes: Vec<usize>,
    tol: Tolerances,
    time: f64,
    flips: usize,
}

impl TeichmullerOrbit {
    /// Starts at `r_θ S` (time 0).
    pub fn new(ts: &TranslationSurface, theta: f64) -> Result<Self, SurfaceError> {
        let rs = ts.apply_linear(&Mat2::rotation(theta))?;
        let np = rs.num_edge_pairs();
        let mut values: Vec<Vec2> = (0..np).map(|p| rs.pair_vector(p)).collect();
        let mut tris = Vec::new();
        let mut corner = Vec::new();
        let side_of = |e: EdgeRef| -> Side {
            let p = rs.edge_pair(e);
            (p, if rs.pair_edge(p) == e { 1 } else { -1 })
        };
        for c in 0..rs.num_cells() {
            let n = rs.cell(c).len();
            let v0 = rs.vertex(c, 0);
            // diagonal k runs from vertex 0 to vertex k
            let mut diag = vec![usize::MAX; n];
            for (k, d) in diag.iter_mut().enumerate().take(n - 1).skip(2) {
                *d = values.len();
                values.push(rs.vertex(c, k) - v0);
            }
            for k in 1..n - 1 {
                let first = if k == 1 { side_of(EdgeRef::new(c, 0)) } else { (diag[k], 1) };
                let last = if k + 1 == n - 1 { side_of(EdgeRef::new(c, n - 1)) } else { (diag[k + 1], -1) };
                tris.push([first, side_of(EdgeRef::new(c, k)), last]);
                corner.push([rs.corner_class(c, 0), rs.corner_class(c, k), rs.corner_class(c, k + 1)]);
            }
        }
        let mut marked_classes: Vec<usize> =
            rs.designated_marks().iter().map(|&(c, v)| rs.corner_class(c, v)).collect();
        marked_classes.sort_unstable();
        marked_classes.dedup();
        let mut orbit = Self {
            sides: vec![[(usize::MAX, 0); 2]; values.len()],
            tris,
            corner,
            coeffs: Vec::new(),
            basis: Vec::new(),
            marked_classes,
            tol: *ts.tolerances(),
            time: 0.0,
            flips: 0,
        };
        orbit.rebuild_sides();
        orbit.rebase(&values);
        orbit.make_delaunay()?;
        Ok(orbit)
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Number of edge flips performed so far.
    pub fn flips(&self) -> usize {
        self.flips
    }

    pub fn num_triangles(&self) -> usize {
        self.tris.len()
    }

    /// Current vector of edge `e`.
    fn value(&self, e: usize) -> Vec2 {
        let mut v = Vec2::ZERO;
        for (k, &c) in self.coeffs[e].iter().enumerate() {
            if c != 0 {
                v += (c as f64) * self.basis[k];
            }
        }
        v
    }

    fn side_value(&self, s: Side) -> Vec2 {
        let v = self.value(s.0);
        if s.1 > 0 {
            v
        } else {
            -v
        }
    }

    fn rebuild_sides(&mut self) {
        for (t, tri) in self.tris.iter().enumerate() {
            for (slot, &(e, s)) in tri.iter().enumerate() {
                self.sides[e][usize::from(s < 0)] = (t, slot);
            }
        }
    }

    /// Picks the edges off a spanning tree of the dual graph as the new basis
    /// and re-expresses every edge over it.
    fn rebase(&mut self, values: &[Vec2]) {
        let ne = values.len();
        let nt = self.tris.len();
        let mut in_tree = vec![false; ne];
        let mut parent_edge = vec![usize::MAX; nt];
        let mut seen = vec![false; nt];
        let mut order = Vec::with_capacity(nt);
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(t) = queue.pop_front() {
            order.push(t);
            for &(e, _) in &self.tris[t] {
                let [(a, _), (b, _)] = self.sides[e];
                let other = if a == t { b } else { a };
                if !seen[other] {
                    seen[other] = true;
                    in_tree[e] = true;
                    parent_edge[other] = e;
                    queue.push_back(other);
                }
            }
        }
        let basis_edges: Vec<usize> = (0..ne).filter(|&e| !in_tree[e]).collect();
        let nb = basis_edges.len();
        let mut coeffs = vec![Vec::new(); ne];
        for (k, &e) in basis_edges.iter().enumerate() {
            let mut c = vec![0i64; nb];
            c[k] = 1;
            coeffs[e] = c;
        }
        // Leaves first: each triangle determines the edge to its parent.
        for &t in order.iter().rev() {
            let pe = parent_edge[t];
            if pe == usize::MAX {
                continue;
            }
            let tri = self.tris[t];
            let mut acc = vec![0i64; nb];
            let mut sign_pe = 0i64;
            for &(e, s) in &tri {
                if e == pe {
                    sign_pe = i64::from(s);
                    continue;
                }
                for (a, &c) in acc.iter_mut().zip(&coeffs[e]) {
                    *a += i64::from(s) * c;
                }
            }
            // sign_pe · pe + acc = 0
            coeffs[pe] = acc.into_iter().map(|c| -sign_pe * c).collect();
        }
        self.basis = basis_edges.iter().map(|&e| values[e]).collect();
        self.coeffs = coeffs;
    }

    fn all_values(&self) -> Vec<Vec2> {
        (0..self.coeffs.len()).map(|e| self.value(e)).collect()
    }

    /// Whether edge `e` violates the empty-circumcircle condition.
    fn illegal(&self, e: usize) -> bool {
        let [(t1, s1), (t2, s2)] = self.sides[e];
        let a1 = self.tris[t1];
        let a2 = self.tris[t2];
        let ev = self.side_value(a1[s1]);
        let av = self.side_value(a1[(s1 + 1) % 3]);
        let cv = self.side_value(a2[(s2 + 1) % 3]);
        // P at the origin, Q = e, R = e + a, S = c
        let q = ev;
        let r = ev + av;
        let s = cv;
        // positive when S lies inside the circle through P, Q, R
        let det = -(q.x * (r.y * s.norm2() - s.y * r.norm2()) - q.y * (r.x * s.norm2() - s.x * r.norm2())
            + q.norm2() * (r.x * s.y - r.y * s.x));
        let m = q.norm2().max(r.norm2()).max(s.norm2());
        if det <= 1e-12 * m * m {
            return false;
        }
        // strictly convex quadrilateral P, S, Q, R
        let quad = [Vec2::ZERO, s, q, r];
        (0..4).all(|i| {
            let (a, b, c) = (quad[i], quad[(i + 1) % 4], quad[(i + 2) % 4]);
            (b - a).cross(c - b) > 0.0
        })
    }

    fn flip(&mut self, e: usize) {
        let [(t1, s1), (t2, s2)] = self.sides[e];
        let t1a = self.tris[t1];
        let t2a = self.tris[t2];
        let c1 = self.corner[t1];
        let c2 = self.corner[t2];
        let a = t1a[(s1 + 1) % 3];
        let b = t1a[(s1 + 2) % 3];
        let c = t2a[(s2 + 1) % 3];
        let d = t2a[(s2 + 2) % 3];
        // classes at P, Q, R, S
        let (p, q, r, s) = (c1[s1], c1[(s1 + 1) % 3], c1[(s1 + 2) % 3], c2[(s2 + 2) % 3]);
        let nb = self.basis.len();
        let mut fc = vec![0i64; nb];
        for (side, w) in [(d, 1i64), (a, 1i64)] {
            for (x, &y) in fc.iter_mut().zip(&self.coeffs[side.0]) {
                *x += w * i64::from(side.1) * y;
            }
        }
        self.coeffs[e] = fc;
        self.tris[t1] = [(e, 1), b, c];
        self.corner[t1] = [s, r, p];
        self.tris[t2] = [(e, -1), d, a];
        self.corner[t2] = [r, s, q];
        for t in [t1, t2] {
            for slot in 0..3 {
                let (id, sg) = self.tris[t][slot];
                self.sides[id][usize::from(sg < 0)] = (t, slot);
            }
        }
        self.flips += 1;
    }

    fn make_delaunay(&mut self) -> Result<(), SurfaceError> {
        let ne = self.coeffs.len();
        let cap = 10_000 + 1000 * ne;
        let mut count = 0;
        let mut queue: VecDeque<usize> = (0..ne).collect();
        let mut queued = vec![true; ne];
        while let Some(e) = queue.pop_front() {
            queued[e] = false;
            if !self.illegal(e) {
                continue;
            }
            self.flip(e);
            count += 1;
            if count > cap {
                return Err(SurfaceError::BudgetExceeded { budget: cap });
            }
            let [(t1, _), (t2, _)] = self.sides[e];
            for t in [t1, t2] {
                for &(id, _) in &self.tris[t] {
                    if !queued[id] {
                        queued[id] = true;
                        queue.push_back(id);
                    }
                }
            }
        }
        Ok(())
    }

    /// Advances by `dt` (either sign).
    pub fn step(&mut self, dt: f64) -> Result<(), SurfaceError> {
        let n = (dt.abs() / MAX_SUBSTEP).ceil().max(1.0) as usize;
        let h = dt / n as f64;
        let g = Mat2::teichmuller(h);
        for _ in 0..n {
            for b in &mut self.basis {
                *b = g.apply(*b);
            }
            self.make_delaunay()?;
            let values = self.all_values();
            self.rebase(&values);
        }
        self.time += dt;
        Ok(())
    }

    pub fn advance_to(&mut self, t: f64) -> Result<(), SurfaceError> {
        self.step(t - self.time)
    }

    /// The current surface `g_t r_θ S`, one triangle per cell.
    pub fn surface(&self) -> Result<TranslationSurface, SurfaceError> {
        let values = self.all_values();
        let mut cells = Vec::with_capacity(self.tris.len());
        for tri in &self.tris {
            let a = Vec2::ZERO;
            let b = a + sv(&values, tri[0]);
            let c = b + sv(&values, tri[1]);
            cells.push(vec![a, b, c]);
        }
        let gluings: Vec<(EdgeRef, EdgeRef)> = self
            .sides
            .iter()
            .map(|&[(t1, s1), (t2, s2)]| (EdgeRef::new(t1, s1), EdgeRef::new(t2, s2)))
            .collect();
        let mut marks = Vec::new();
        for &m in &self.marked_classes {
            if let Some((t, k)) =
                self.corner.iter().enumerate().find_map(|(t, cs)| cs.iter().position(|&x| x == m).map(|k| (t, k)))
            {
                marks.push((t, k));
            }
        }
        TranslationSurface::new(cells, &gluings, &marks, self.tol)
    }
}

fn sv(values: &[Vec2], s: Side) -> Vec2 {
    if s.1 > 0 {
        values[s.0]
    } else {
        -values[s.0]
    }
}

/// Systole of `g_t r_θ S` at `t = k·Δt` for `0 ≤ k·Δt < horizon`.
pub fn systole_series(
    ts: &TranslationSurface,
    theta: f64,
    horizon: f64,
    dt: f64,
) -> Result<Vec<(f64, f64)>, SurfaceError> {
    if !(dt > 0.0) || !(horizon > 0.0) {
        return Err(SurfaceError::InvalidArgument("horizon and step must be positive".into()));
    }
    let n = ((horizon / dt) * (1.0 + 1e-12)).floor() as usize;
    let n = n.max(1);
    let mut orbit = TeichmullerOrbit::new(ts, theta)?;
    let mut snapshots = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        orbit.advance_to(t)?;
        snapshots.push((t, orbit.surface()?));
    }
    snapshots
        .par_iter()
        .map(|(t, s)| systole_with_budget(s, DEFAULT_NODE_BUDGET).map(|v| (*t, v)))
        .collect()
}

/// Fraction of the horizon during which the systole of `g_t r_θ S` is
/// below `eps`, sampled every `dt`.
pub fn recurrence_fraction(
    ts: &TranslationSurface,
    theta: f64,
    horizon: f64,
    eps: f64,
    dt: f64,
) -> Result<f64, SurfaceError> {
    let series = systole_series(ts, theta, horizon, dt)?;
    let below = series.iter().filter(|&&(_, s)| s < eps).count();
    Ok((below as f64 * dt / horizon).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::{saddle_connections, square_torus, systole};

    #[test]
    fn start_matches_rotated_surface() {
        let t = square_torus();
        let o = TeichmullerOrbit::new(&t, 0.3).unwrap();
        let s = o.surface().unwrap();
        assert!((s.area() - 1.0).abs() < 1e-12);
        assert!((systole(&s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tracked_systole_matches_direct_flow() {
        let t = square_torus();
        let theta = 0.4;
        let mut o = TeichmullerOrbit::new(&t, theta).unwrap();
        for k in 1..=8 {
            let time = 0.5 * k as f64;
            o.advance_to(time).unwrap();
            let direct = t.rotate(theta).teich_flow(time).unwrap();
            let a = systole(&o.surface().unwrap()).unwrap();
            let b = systole(&direct).unwrap();
            assert!((a - b).abs() < 1e-9 * b.max(1.0), "t={time}: {a} vs {b}");
        }
    }

    #[test]
    fn holonomies_match_direct_flow() {
        let t = square_torus();
        let theta = 1.1;
        let mut o = TeichmullerOrbit::new(&t, theta).unwrap();
        o.advance_to(1.5).unwrap();
        let direct = t.rotate(theta).teich_flow(1.5).unwrap();
        let key = |s: &TranslationSurface| {
            let mut v: Vec<(i64, i64)> = saddle_connections(s, 2.0)
                .unwrap()
                .iter()
                .map(|c| ((c.holonomy.x * 1e8).round() as i64, (c.holonomy.y * 1e8).round() as i64))
                .collect();
            v.sort();
            v
        };
        assert_eq!(key(&o.surface().unwrap()), key(&direct));
    }

    #[test]
    fn golden_direction_stays_thick() {
        // slope of the flow direction is the golden ratio
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let theta = -(1.0 / phi).atan();
        let f = recurrence_fraction(&square_torus(), theta, 20.0, 0.2, 0.25).unwrap();
        assert_eq!(f, 0.0);
    }

    #[test]
    fn fraction_is_monotone_in_eps() {
        let t = square_torus();
        let series = systole_series(&t, 0.123, 8.0, 0.5).unwrap();
        let frac = |eps: f64| series.iter().filter(|&&(_, s)| s < eps).count();
        let mut last = 0;
        for eps in [0.05, 0.1, 0.2, 0.4, 0.8, 1.2] {
            let f = frac(eps);
            assert!(f >= last);
            last = f;
        }
        assert_eq!(frac(1e-6), 0);
    }
}
