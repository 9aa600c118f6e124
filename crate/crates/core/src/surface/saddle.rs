//! Saddle connections by breadth-first geodesic development.
//!
//! From every corner of every marked vertex we develop the open sector of
//! directions across the cells. A sector is split at each cell vertex it
//! sees; a vertex that is marked ends a saddle connection, a regular
//! (unmarked, angle `2π`) vertex is transparent and the exact ray through it
//! is continued on the far side. Rays along the edges leaving a marked
//! corner are handled separately since they bound the initial sectors.

use serde::Serialize;
use std::collections::{HashSet, VecDeque};

use super::{Corner, EdgeRef, SectorHit, SurfaceError, TranslationSurface};
use crate::linalg::{point_segment_distance, Vec2};

pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SaddleConnection {
    pub holonomy: Vec2,
    /// Vertex class ids of the endpoints.
    pub start: usize,
    pub end: usize,
    /// Corner the connection leaves from.
    pub start_corner: Corner,
    /// Cells traversed, in order.
    pub path: Vec<usize>,
}

impl SaddleConnection {
    pub fn length(&self) -> f64 {
        self.holonomy.norm()
    }
}

#[derive(Clone, Copy, Debug)]
enum Entry {
    Corner(usize),
    Edge(usize),
}

#[derive(Clone, Debug)]
struct Origin {
    class: usize,
    corner: Corner,
}

#[derive(Debug)]
enum Item {
    Wedge { cell: usize, origin: Vec2, right: Vec2, left: Vec2, entry: Entry, src: usize, path: Vec<usize> },
    Ray { cell: usize, origin: Vec2, dir: Vec2, entry: Entry, src: usize, path: Vec<usize> },
}

struct Search<'a> {
    ts: &'a TranslationSurface,
    l_max: f64,
    budget: usize,
    nodes: usize,
    queue: VecDeque<Item>,
    origins: Vec<Origin>,
    found: Vec<SaddleConnection>,
    seen: HashSet<(usize, usize, i64, i64)>,
    key_scale: f64,
}

const DIR_EPS: f64 = 1e-11;

impl<'a> Search<'a> {
    fn tick(&mut self) -> Result<(), SurfaceError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(SurfaceError::BudgetExceeded { budget: self.budget });
        }
        Ok(())
    }

    fn record(&mut self, src: usize, end_class: usize, hol: Vec2, path: &[usize]) {
        let o = &self.origins[src];
        let key = (
            o.class,
            end_class,
            (hol.x / self.key_scale).round() as i64,
            (hol.y / self.key_scale).round() as i64,
        );
        if self.seen.insert(key) {
            self.found.push(SaddleConnection {
                holonomy: hol,
                start: o.class,
                end: end_class,
                start_corner: o.corner,
                path: path.to_vec(),
            });
        }
    }

    /// The developed segment from the origin reaches vertex `j` of `cell`
    /// with holonomy `hol`.
    fn hit_vertex(&mut self, cell: usize, j: usize, hol: Vec2, src: usize, path: &[usize]) -> Result<(), SurfaceError> {
        let (mut cell, mut j, mut hol) = (cell, j, hol);
        let mut path = path.to_vec();
        loop {
            self.tick()?;
            if hol.norm() > self.l_max * (1.0 + 1e-12) {
                return Ok(());
            }
            let class = self.ts.corner_class(cell, j);
            if self.ts.classes()[class].marked {
                self.record(src, class, hol, &path);
                return Ok(());
            }
            match self.ts.locate_direction(cell, j, hol) {
                Some(SectorHit::Inside((c2, i2))) => {
                    let mut p = path.clone();
                    if p.last() != Some(&c2) {
                        p.push(c2);
                    }
                    let origin = self.ts.vertex(c2, i2) - hol;
                    self.queue.push_back(Item::Ray {
                        cell: c2,
                        origin,
                        dir: hol.normalized(),
                        entry: Entry::Corner(i2),
                        src,
                        path: p,
                    });
                    return Ok(());
                }
                Some(SectorHit::AlongEdge((c2, i2))) => {
                    hol += self.ts.edge_vector(EdgeRef::new(c2, i2));
                    if path.last() != Some(&c2) {
                        path.push(c2);
                    }
                    cell = c2;
                    j = i2 + 1;
                }
                None => return Ok(()),
            }
        }
    }

    fn process(&mut self, item: Item) -> Result<(), SurfaceError> {
        self.tick()?;
        match item {
            Item::Wedge { cell, origin, right, left, entry, src, path } => {
                self.process_wedge(cell, origin, right, left, entry, src, path)
            }
            Item::Ray { cell, origin, dir, entry, src, path } => self.process_ray(cell, origin, dir, entry, src, path),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn process_wedge(
        &mut self,
        cell: usize,
        origin: Vec2,
        right: Vec2,
        left: Vec2,
        entry: Entry,
        src: usize,
        path: Vec<usize>,
    ) -> Result<(), SurfaceError> {
        let pts = self.ts.cell(cell);
        let n = pts.len();
        let (rn, ln) = (right.normalized(), left.normalized());
        let excluded = |j: usize| match entry {
            Entry::Corner(k) => j == k,
            Entry::Edge(e) => j == e || j == (e + 1) % n,
        };
        let mut inside: Vec<(f64, usize, Vec2)> = Vec::new();
        for (j, &v) in pts.iter().enumerate() {
            if excluded(j) {
                continue;
            }
            let w = v - origin;
            let wn = w.normalized();
            if rn.cross(wn) > DIR_EPS && wn.cross(ln) > DIR_EPS {
                inside.push((rn.cross(wn).atan2(rn.dot(wn)), j, w));
            }
        }
        inside.sort_by(|a, b| a.0.total_cmp(&b.0));
        for &(_, j, w) in &inside {
            if w.norm() <= self.l_max * (1.0 + 1e-12) {
                self.hit_vertex(cell, j, w, src, &path)?;
            }
        }
        let mut bounds = Vec::with_capacity(inside.len() + 2);
        bounds.push(rn);
        bounds.extend(inside.iter().map(|&(_, _, w)| w.normalized()));
        bounds.push(ln);
        for win in bounds.windows(2) {
            let (a, b) = (win[0], win[1]);
            let mid = (a + b).normalized();
            let Some(e) = exit_edge(pts, origin, mid, entry) else { continue };
            let ev0 = pts[e];
            let ev1 = pts[(e + 1) % n];
            if point_segment_distance(origin, ev0, ev1) > self.l_max {
                continue;
            }
            let er = EdgeRef::new(cell, e);
            let p = self.ts.partner(er);
            let mut np = path.clone();
            np.push(p.cell);
            self.queue.push_back(Item::Wedge {
                cell: p.cell,
                origin: origin + self.ts.shift(er),
                right: a,
                left: b,
                entry: Entry::Edge(p.edge),
                src,
                path: np,
            });
        }
        Ok(())
    }

    fn process_ray(
        &mut self,
        cell: usize,
        origin: Vec2,
        dir: Vec2,
        entry: Entry,
        src: usize,
        path: Vec<usize>,
    ) -> Result<(), SurfaceError> {
        let pts = self.ts.cell(cell);
        let n = pts.len();
        let Some(e) = exit_edge(pts, origin, dir, entry) else { return Ok(()) };
        let a = pts[e];
        let b = pts[(e + 1) % n];
        let ev = b - a;
        let denom = dir.cross(ev);
        let t = (a - origin).cross(ev) / denom;
        let s = (a - origin).cross(dir) / denom;
        let tol = 1e-10;
        if s.abs() * ev.norm() <= tol * ev.norm().max(t) {
            return self.hit_vertex(cell, e, a - origin, src, &path);
        }
        if (1.0 - s).abs() * ev.norm() <= tol * ev.norm().max(t) {
            return self.hit_vertex(cell, (e + 1) % n, b - origin, src, &path);
        }
        if t > self.l_max {
            return Ok(());
        }
        let er = EdgeRef::new(cell, e);
        let p = self.ts.partner(er);
        let mut np = path;
        np.push(p.cell);
        self.queue.push_back(Item::Ray {
            cell: p.cell,
            origin: origin + self.ts.shift(er),
            dir,
            entry: Entry::Edge(p.edge),
            src,
            path: np,
        });
        Ok(())
    }
}

/// Edge through which the ray `origin + t·dir` leaves the convex cell.
fn exit_edge(pts: &[Vec2], origin: Vec2, dir: Vec2, entry: Entry) -> Option<usize> {
    let n = pts.len();
    let mut best: Option<(f64, f64, usize)> = None;
    for e in 0..n {
        let skip = match entry {
            Entry::Corner(k) => e == k || e == (k + n - 1) % n,
            Entry::Edge(x) => e == x,
        };
        if skip {
            continue;
        }
        let a = pts[e];
        let ev = pts[(e + 1) % n] - a;
        let denom = dir.cross(ev);
        // outward crossing of a counterclockwise edge
        if denom <= 0.0 {
            continue;
        }
        let t = (a - origin).cross(ev) / denom;
        let s = (a - origin).cross(dir) / denom;
        let miss = if s < 0.0 { -s } else if s > 1.0 { s - 1.0 } else { 0.0 };
        let cand = (miss, -t, e);
        if best.is_none_or(|b| (cand.0, cand.1) < (b.0, b.1)) {
            best = Some(cand);
        }
    }
    best.map(|b| b.2)
}

/// All saddle connections of length at most `l_max`, each reported once per
/// orientation.
pub fn saddle_connections(ts: &TranslationSurface, l_max: f64) -> Result<Vec<SaddleConnection>, SurfaceError> {
    saddle_connections_with_budget(ts, l_max, DEFAULT_NODE_BUDGET)
}

pub fn saddle_connections_with_budget(
    ts: &TranslationSurface,
    l_max: f64,
    budget: usize,
) -> Result<Vec<SaddleConnection>, SurfaceError> {
    if !(l_max > 0.0) {
        return Err(SurfaceError::InvalidArgument(format!("l_max must be positive, got {l_max}")));
    }
    let mut s = Search {
        ts,
        l_max,
        budget,
        nodes: 0,
        queue: VecDeque::new(),
        origins: Vec::new(),
        found: Vec::new(),
        seen: HashSet::new(),
        key_scale: ts.tolerances().dedup * l_max.max(1.0),
    };
    for (k, class) in ts.classes().iter().enumerate() {
        if !class.marked {
            continue;
        }
        for &(c, v) in &class.corners {
            let src = s.origins.len();
            s.origins.push(Origin { class: k, corner: (c, v) });
            let (out, back) = ts.corner_sector(c, v);
            // the ray along the outgoing edge
            s.hit_vertex(c, v + 1, out, src, &[c])?;
            s.queue.push_back(Item::Wedge {
                cell: c,
                origin: ts.vertex(c, v),
                right: out,
                left: back,
                entry: Entry::Corner(v),
                src,
                path: vec![c],
            });
        }
    }
    while let Some(item) = s.queue.pop_front() {
        s.process(item)?;
    }
    let mut found = s.found;
    found.sort_by(|a, b| {
        a.length()
            .total_cmp(&b.length())
            .then(a.holonomy.angle().total_cmp(&b.holonomy.angle()))
            .then(a.start.cmp(&b.start))
    });
    Ok(found)
}

/// Length of the shortest saddle connection.
pub fn systole(ts: &TranslationSurface) -> Result<f64, SurfaceError> {
    systole_with_budget(ts, DEFAULT_NODE_BUDGET)
}

pub fn systole_with_budget(ts: &TranslationSurface, budget: usize) -> Result<f64, SurfaceError> {
    // An edge joining two marked corners contains no vertex in its
    // interior, so it is itself a saddle connection.
    let mut bound = f64::INFINITY;
    for p in 0..ts.num_edge_pairs() {
        let e = ts.pair_edge(p);
        let marked = |v: usize| ts.classes()[ts.corner_class(e.cell, v)].marked;
        if marked(e.edge) && marked(e.edge + 1) {
            bound = bound.min(ts.pair_vector(p).norm());
        }
    }
    if bound.is_finite() {
        let scs = saddle_connections_with_budget(ts, bound, budget)?;
        return Ok(scs.first().map_or(bound, |s| s.length().min(bound)));
    }
    let mut l = ts.area().sqrt() / 8.0;
    for _ in 0..64 {
        let scs = saddle_connections_with_budget(ts, l, budget)?;
        if let Some(s) = scs.first() {
            return Ok(s.length());
        }
        l *= 2.0;
    }
    Err(SurfaceError::NoMarkedPoint)
}
