//! Translation surfaces built from convex planar cells glued by translations.
//!
//! A surface is a list of counterclockwise convex polygons together with an
//! involution on their directed edges. Two glued edges are parallel, of equal
//! length and opposite orientation, so that the identification is a
//! translation. Corners fall into vertex classes (the points of the surface
//! that are cell corners); the total angle of a class is a multiple of `2π`,
//! and classes with angle above `2π` are the cone points (zeros of `ω`).

mod saddle;
mod spec;
mod teich;

pub use saddle::{saddle_connections, systole, systole_with_budget, SaddleConnection};
pub use spec::{CellSpec, SurfaceSpec};
pub use teich::{recurrence_fraction, systole_series, TeichmullerOrbit};

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

use crate::linalg::{interior_angle, polygon_area, Mat2, Vec2};
use crate::tol::Tolerances;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SurfaceError {
    #[error("cell {cell}: {reason}")]
    InvalidCell { cell: usize, reason: String },
    #[error("invalid gluing: {0}")]
    InvalidGluing(String),
    #[error("vertex class {class} has total angle {angle} which is not a multiple of 2π")]
    InconsistentAngles { class: usize, angle: f64 },
    #[error("saddle-connection search exceeded its budget of {budget} nodes")]
    BudgetExceeded { budget: usize },
    #[error("surface has no cone point or marked point")]
    NoMarkedPoint,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// A directed edge `edge` of cell `cell` (from vertex `edge` to `edge + 1`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeRef {
    pub cell: usize,
    pub edge: usize,
}

impl EdgeRef {
    pub const fn new(cell: usize, edge: usize) -> Self {
        Self { cell, edge }
    }
}

/// A cell corner `(cell, vertex index)`.
pub type Corner = (usize, usize);

/// Where a direction leaves a vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SectorHit {
    /// Strictly inside the sector of this corner.
    Inside(Corner),
    /// Along the outgoing edge of this corner.
    AlongEdge(Corner),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VertexClass {
    pub corners: Vec<Corner>,
    /// Total cone angle in radians.
    pub angle: f64,
    /// Participates in saddle connections (cone points, plus any designated
    /// marked point).
    pub marked: bool,
}

impl VertexClass {
    /// Zero order `k` with cone angle `2π(k + 1)`.
    pub fn order(&self) -> usize {
        ((self.angle / TAU).round() as usize).saturating_sub(1)
    }

    pub fn is_singular(&self) -> bool {
        self.order() > 0
    }
}

#[derive(Clone, Debug)]
pub struct TranslationSurface {
    cells: Vec<Vec<Vec2>>,
    gluing: Vec<Vec<EdgeRef>>,
    corner_class: Vec<Vec<usize>>,
    classes: Vec<VertexClass>,
    edge_pair: Vec<Vec<usize>>,
    pairs: Vec<EdgeRef>,
    designated: Vec<Corner>,
    area: f64,
    tol: Tolerances,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

impl TranslationSurface {
    /// Builds and audits a surface.
    ///
    /// `marked` designates extra marked corners; cone points are always
    /// marked. When the surface has no cone point and `marked` is empty, the
    /// class of corner `(0, 0)` is marked.
    pub fn new(
        cells: Vec<Vec<Vec2>>,
        gluings: &[(EdgeRef, EdgeRef)],
        marked: &[Corner],
        tol: Tolerances,
    ) -> Result<Self, SurfaceError> {
        if cells.is_empty() {
            return Err(SurfaceError::InvalidCell { cell: 0, reason: "no cells".into() });
        }
        let mut area = 0.0;
        for (ci, cell) in cells.iter().enumerate() {
            let n = cell.len();
            if n < 3 {
                return Err(SurfaceError::InvalidCell { cell: ci, reason: "fewer than 3 vertices".into() });
            }
            for i in 0..n {
                let a = cell[i];
                let b = cell[(i + 1) % n];
                let c = cell[(i + 2) % n];
                if (b - a).cross(c - b) <= 1e-12 * (b - a).norm() * (c - b).norm() {
                    return Err(SurfaceError::InvalidCell {
                        cell: ci,
                        reason: format!("not strictly convex and counterclockwise at vertex {}", (i + 1) % n),
                    });
                }
            }
            area += polygon_area(cell);
        }

        let mut gluing: Vec<Vec<Option<EdgeRef>>> = cells.iter().map(|c| vec![None; c.len()]).collect();
        for &(a, b) in gluings {
            for e in [a, b] {
                if e.cell >= cells.len() || e.edge >= cells[e.cell].len() {
                    return Err(SurfaceError::InvalidGluing(format!("edge {e:?} does not exist")));
                }
            }
            if a == b {
                return Err(SurfaceError::InvalidGluing(format!("edge {a:?} glued to itself")));
            }
            for (x, y) in [(a, b), (b, a)] {
                if gluing[x.cell][x.edge].is_some() {
                    return Err(SurfaceError::InvalidGluing(format!("edge {x:?} glued twice")));
                }
                gluing[x.cell][x.edge] = Some(y);
            }
        }
        let gluing: Vec<Vec<EdgeRef>> = gluing
            .into_iter()
            .enumerate()
            .map(|(ci, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(ei, g)| g.ok_or_else(|| SurfaceError::InvalidGluing(format!("edge ({ci}, {ei}) is unglued"))))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;

        // Edge pairs: canonical representative is the lexicographically smaller edge.
        let mut edge_pair: Vec<Vec<usize>> = cells.iter().map(|c| vec![usize::MAX; c.len()]).collect();
        let mut pairs = Vec::new();
        for ci in 0..cells.len() {
            for ei in 0..cells[ci].len() {
                let here = EdgeRef::new(ci, ei);
                let there = gluing[ci][ei];
                let v = edge_vector(&cells[ci], ei);
                let w = edge_vector(&cells[there.cell], there.edge);
                let scale = v.norm().max(w.norm()).max(1.0);
                if (v + w).norm() > tol.audit * scale {
                    return Err(SurfaceError::InvalidGluing(format!(
                        "edges {here:?} and {there:?} are not opposite translates ({v:?} vs {w:?})"
                    )));
                }
                if here < there {
                    let p = pairs.len();
                    pairs.push(here);
                    edge_pair[ci][ei] = p;
                    edge_pair[there.cell][there.edge] = p;
                }
            }
        }

        // Vertex classes.
        let offsets: Vec<usize> = cells
            .iter()
            .scan(0, |acc, c| {
                let o = *acc;
                *acc += c.len();
                Some(o)
            })
            .collect();
        let total: usize = cells.iter().map(|c| c.len()).sum();
        let mut uf = UnionFind((0..total).collect());
        for ci in 0..cells.len() {
            let n = cells[ci].len();
            for ei in 0..n {
                let t = gluing[ci][ei];
                let m = cells[t.cell].len();
                // start of (ci, ei) ~ end of partner, end of (ci, ei) ~ start of partner
                uf.union(offsets[ci] + ei, offsets[t.cell] + (t.edge + 1) % m);
                uf.union(offsets[ci] + (ei + 1) % n, offsets[t.cell] + t.edge);
            }
        }
        let mut root_to_class = std::collections::BTreeMap::new();
        let mut corner_class: Vec<Vec<usize>> = cells.iter().map(|c| vec![0; c.len()]).collect();
        let mut classes: Vec<VertexClass> = Vec::new();
        for ci in 0..cells.len() {
            let n = cells[ci].len();
            for vi in 0..n {
                let r = uf.find(offsets[ci] + vi);
                let k = *root_to_class.entry(r).or_insert_with(|| {
                    classes.push(VertexClass { corners: Vec::new(), angle: 0.0, marked: false });
                    classes.len() - 1
                });
                corner_class[ci][vi] = k;
                classes[k].corners.push((ci, vi));
                classes[k].angle += interior_angle(cells[ci][(vi + n - 1) % n], cells[ci][vi], cells[ci][(vi + 1) % n]);
            }
        }
        for (k, class) in classes.iter_mut().enumerate() {
            let turns = class.angle / TAU;
            if turns.round() < 1.0 || (turns - turns.round()).abs() * TAU > tol.audit * class.corners.len().max(1) as f64 {
                return Err(SurfaceError::InconsistentAngles { class: k, angle: class.angle });
            }
            class.marked = class.is_singular();
        }
        let mut designated = Vec::new();
        for &(c, v) in marked {
            if c >= cells.len() || v >= cells[c].len() {
                return Err(SurfaceError::InvalidArgument(format!("marked corner ({c}, {v}) does not exist")));
            }
            classes[corner_class[c][v]].marked = true;
            designated.push((c, v));
        }
        if !classes.iter().any(|c| c.marked) {
            classes[corner_class[0][0]].marked = true;
            designated.push((0, 0));
        }

        Ok(Self { cells, gluing, corner_class, classes, edge_pair, pairs, designated, area, tol })
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, c: usize) -> &[Vec2] {
        &self.cells[c]
    }

    pub fn cells(&self) -> &[Vec<Vec2>] {
        &self.cells
    }

    pub fn vertex(&self, c: usize, i: usize) -> Vec2 {
        let cell = &self.cells[c];
        cell[i % cell.len()]
    }

    pub fn edge_vector(&self, e: EdgeRef) -> Vec2 {
        edge_vector(&self.cells[e.cell], e.edge)
    }

    pub fn partner(&self, e: EdgeRef) -> EdgeRef {
        self.gluing[e.cell][e.edge]
    }

    /// Translation taking points of edge `e` (in its cell frame) to the
    /// same points in the frame of the partner cell.
    pub fn shift(&self, e: EdgeRef) -> Vec2 {
        let p = self.partner(e);
        self.vertex(p.cell, p.edge + 1) - self.vertex(e.cell, e.edge)
    }

    /// All gluings as `(canonical edge, partner)` pairs.
    pub fn gluings(&self) -> Vec<(EdgeRef, EdgeRef)> {
        self.pairs.iter().map(|&e| (e, self.partner(e))).collect()
    }

    pub fn num_edge_pairs(&self) -> usize {
        self.pairs.len()
    }

    pub fn edge_pair(&self, e: EdgeRef) -> usize {
        self.edge_pair[e.cell][e.edge]
    }

    /// Canonical representative of an edge pair.
    pub fn pair_edge(&self, p: usize) -> EdgeRef {
        self.pairs[p]
    }

    /// Holonomy of the canonical representative of an edge pair.
    pub fn pair_vector(&self, p: usize) -> Vec2 {
        self.edge_vector(self.pairs[p])
    }

    pub fn corner_class(&self, c: usize, v: usize) -> usize {
        self.corner_class[c][v % self.cells[c].len()]
    }

    pub fn classes(&self) -> &[VertexClass] {
        &self.classes
    }

    pub fn designated_marks(&self) -> &[Corner] {
        &self.designated
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        polygon_area(&self.cells[c])
    }

    pub fn cell_diameter(&self, c: usize) -> f64 {
        cell_diameter(&self.cells[c])
    }

    pub fn max_cell_diameter(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_diameter(c)).fold(0.0, f64::max)
    }

    /// Zero orders of the cone points, sorted descending.
    pub fn zero_orders(&self) -> Vec<usize> {
        let mut z: Vec<usize> = self.classes.iter().map(|c| c.order()).filter(|&k| k > 0).collect();
        z.sort_unstable_by(|a, b| b.cmp(a));
        z
    }

    pub fn genus(&self) -> usize {
        self.zero_orders().iter().sum::<usize>() / 2 + 1
    }

    /// The next corner counterclockwise around the same vertex: crossing the
    /// incoming edge of corner `(c, i)`.
    pub fn next_corner_ccw(&self, c: usize, i: usize) -> Corner {
        let n = self.cells[c].len();
        let p = self.partner(EdgeRef::new(c, (i % n + n - 1) % n));
        (p.cell, p.edge)
    }

    /// Directions bounding the sector of corner `(c, i)`: the outgoing edge
    /// and the reversed incoming edge (counterclockwise from the first).
    pub fn corner_sector(&self, c: usize, i: usize) -> (Vec2, Vec2) {
        let n = self.cells[c].len();
        let i = i % n;
        let v = self.cells[c][i];
        (self.cells[c][(i + 1) % n] - v, self.cells[c][(i + n - 1) % n] - v)
    }

    /// Locates direction `d` among the corners around the vertex of corner
    /// `(c, i)`, walking counterclockwise from it. For a cone point several
    /// corners contain `d`; the first one found is returned.
    pub fn locate_direction(&self, c: usize, i: usize, d: Vec2) -> Option<SectorHit> {
        let start = (c, i % self.cells[c].len());
        let mut cur = start;
        let dn = d.normalized();
        let eps = 1e-12;
        loop {
            let (out, back) = self.corner_sector(cur.0, cur.1);
            let (o, b) = (out.normalized(), back.normalized());
            let co = o.cross(dn);
            if co.abs() <= eps && o.dot(dn) > 0.0 {
                return Some(SectorHit::AlongEdge(cur));
            }
            if co > eps && dn.cross(b) > eps {
                return Some(SectorHit::Inside(cur));
            }
            cur = self.next_corner_ccw(cur.0, cur.1);
            if cur == start {
                return None;
            }
        }
    }

    /// Applies a linear map to every cell (and so to `ω`). Orientation
    /// reversing maps are rejected.
    pub fn apply_linear(&self, m: &Mat2) -> Result<Self, SurfaceError> {
        if m.det() <= 0.0 {
            return Err(SurfaceError::InvalidArgument("linear map must preserve orientation".into()));
        }
        let cells = self.cells.iter().map(|c| c.iter().map(|&p| m.apply(p)).collect()).collect();
        Self::new(cells, &self.gluings(), &self.designated, self.tol)
    }

    /// Circle-flow action `r_θ`.
    pub fn rotate(&self, theta: f64) -> Self {
        self.apply_linear(&Mat2::rotation(theta)).expect("rotation preserves the surface structure")
    }

    /// Teichmüller flow `g_t = diag(e^t, e^{-t})`.
    pub fn teich_flow(&self, t: f64) -> Result<Self, SurfaceError> {
        self.apply_linear(&Mat2::teichmuller(t))
    }

    /// Uniform scaling to unit area.
    pub fn normalize_area(&self) -> Self {
        let s = self.area.sqrt().recip();
        if (s - 1.0).abs() < 1e-15 {
            return self.clone();
        }
        self.apply_linear(&Mat2::new(s, 0.0, 0.0, s)).expect("scaling preserves the surface structure")
    }

    /// Upper bound on the flat diameter: the sum of cell diameters over a
    /// spanning tree of the cell adjacency graph.
    pub fn diameter_upper_bound(&self) -> f64 {
        (0..self.cells.len()).map(|c| self.cell_diameter(c)).sum()
    }

    /// Replaces the tolerance profile.
    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }
}

pub(crate) fn edge_vector(cell: &[Vec2], e: usize) -> Vec2 {
    let n = cell.len();
    cell[(e + 1) % n] - cell[e % n]
}

pub(crate) fn cell_diameter(cell: &[Vec2]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in cell.iter().enumerate() {
        for b in &cell[i + 1..] {
            d = d.max(a.dist(*b));
        }
    }
    d
}

/// The unit square glued to itself into the square torus.
pub fn square_torus() -> TranslationSurface {
    let cell = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
    TranslationSurface::new(
        vec![cell],
        &[(EdgeRef::new(0, 0), EdgeRef::new(0, 2)), (EdgeRef::new(0, 1), EdgeRef::new(0, 3))],
        &[],
        Tolerances::default(),
    )
    .expect("square torus is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn two_square_torus() -> TranslationSurface {
        let a = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
        let b = a.clone();
        TranslationSurface::new(
            vec![a, b],
            &[
                (EdgeRef::new(0, 1), EdgeRef::new(1, 3)),
                (EdgeRef::new(1, 1), EdgeRef::new(0, 3)),
                (EdgeRef::new(0, 0), EdgeRef::new(0, 2)),
                (EdgeRef::new(1, 0), EdgeRef::new(1, 2)),
            ],
            &[],
            Tolerances::default(),
        )
        .unwrap()
    }

    #[test]
    fn square_torus_structure() {
        let t = square_torus();
        assert_eq!(t.classes().len(), 1);
        assert!((t.classes()[0].angle - 2.0 * PI).abs() < 1e-12);
        assert!(t.classes()[0].marked);
        assert_eq!(t.genus(), 1);
        assert!(t.zero_orders().is_empty());
        assert_eq!(t.num_edge_pairs(), 2);
        assert!((t.diameter_upper_bound() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn two_square_diameter_bound() {
        let t = two_square_torus();
        assert!(t.diameter_upper_bound() <= 2.0 * 2f64.sqrt() + 1e-15);
        assert_eq!(t.classes().len(), 2);
    }

    #[test]
    fn rejects_bad_gluing() {
        let cell = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)];
        let r = TranslationSurface::new(
            vec![cell],
            &[(EdgeRef::new(0, 0), EdgeRef::new(0, 1)), (EdgeRef::new(0, 2), EdgeRef::new(0, 3))],
            &[],
            Tolerances::default(),
        );
        assert!(matches!(r, Err(SurfaceError::InvalidGluing(_))));
    }

    #[test]
    fn rejects_clockwise_cells() {
        let cell = vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 1.0), Vec2::new(1.0, 1.0), Vec2::new(1.0, 0.0)];
        let r = TranslationSurface::new(
            vec![cell],
            &[(EdgeRef::new(0, 0), EdgeRef::new(0, 2)), (EdgeRef::new(0, 1), EdgeRef::new(0, 3))],
            &[],
            Tolerances::default(),
        );
        assert!(matches!(r, Err(SurfaceError::InvalidCell { .. })));
    }

    #[test]
    fn actions_preserve_combinatorics_and_area() {
        let t = two_square_torus();
        for &s in &[-10.0, -1.0, 0.5, 3.0, 10.0] {
            let g = t.teich_flow(s).unwrap();
            assert!((g.area() - t.area()).abs() < 1e-9);
            assert_eq!(g.classes().len(), t.classes().len());
            assert_eq!(g.gluings(), t.gluings());
        }
        let r = t.rotate(0.7);
        assert_eq!(r.classes().len(), t.classes().len());
    }

    #[test]
    fn rotation_group_law() {
        let t = two_square_torus();
        let a = t.rotate(0.3).rotate(1.1);
        let b = t.rotate(1.4);
        for c in 0..t.num_cells() {
            for (p, q) in a.cell(c).iter().zip(b.cell(c)) {
                assert!(p.dist(*q) < 1e-12);
            }
        }
        let z = t.rotate(0.0);
        assert_eq!(z.cell(0), t.cell(0));
    }

    #[test]
    fn teich_semigroup_law() {
        let t = two_square_torus();
        let a = t.teich_flow(0.4).unwrap().teich_flow(-1.3).unwrap();
        let b = t.teich_flow(-0.9).unwrap();
        for c in 0..t.num_cells() {
            for (p, q) in a.cell(c).iter().zip(b.cell(c)) {
                assert!(p.dist(*q) < 1e-9);
            }
        }
    }

    #[test]
    fn normalize_area_scales() {
        let t = two_square_torus();
        let n = t.normalize_area();
        assert!((n.area() - 1.0).abs() < 1e-12);
        let s = 2f64.sqrt().recip();
        assert!((n.vertex(0, 2).x - s).abs() < 1e-15);
        let u = square_torus().normalize_area();
        assert_eq!(u.cell(0), square_torus().cell(0));
    }

    #[test]
    fn corner_walk_on_torus() {
        let t = square_torus();
        // All four corners of the square meet at the single vertex.
        let mut seen = vec![(0, 0)];
        let mut cur = t.next_corner_ccw(0, 0);
        while cur != (0, 0) {
            seen.push(cur);
            cur = t.next_corner_ccw(cur.0, cur.1);
        }
        assert_eq!(seen.len(), 4);
        let c = t.locate_direction(0, 0, Vec2::new(-1.0, -1.0)).unwrap();
        assert_eq!(c, SectorHit::Inside((0, 2)));
        let e = t.locate_direction(0, 0, Vec2::new(0.0, -1.0)).unwrap();
        assert_eq!(e, SectorHit::AlongEdge((0, 3)));
    }
}
