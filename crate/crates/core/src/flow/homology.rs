use serde::Serialize;
use std::collections::VecDeque;

use super::tracer::{Piece, PieceExit, TrajectorySegment};
use crate::linalg::Vec2;
use crate::surface::{EdgeRef, TranslationSurface};

/// Integer coordinates of a class in `H₁(S, Z)` over a [`HomologyBasis`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HomologyVector(pub Vec<i64>);

impl HomologyVector {
    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&c| c as f64).collect()
    }
}

/// A basis of `H₁(S, Z)` from a tree–cotree decomposition of the cell
/// complex.
///
/// `T` is a spanning tree of the vertex graph and `D` a spanning tree of the
/// cell adjacency graph avoiding `T`; the `2g` leftover edge pairs each close
/// up through `D` into a loop, and these loops are the basis. A trajectory
/// is closed up through `D` as well, so its class only depends on its signed
/// edge crossings.
#[derive(Clone, Debug)]
pub struct HomologyBasis {
    /// Leftover edge pairs, one per basis loop.
    pub leftover: Vec<usize>,
    /// `coords = matrix · crossings`, row-major `2g × pairs`.
    matrix: Vec<Vec<i64>>,
    /// Holonomy of each basis loop.
    periods: Vec<Vec2>,
}

fn exit_sign(ts: &TranslationSurface, e: EdgeRef) -> i64 {
    if ts.pair_edge(ts.edge_pair(e)) == e {
        -1
    } else {
        1
    }
}

impl HomologyBasis {
    pub fn new(ts: &TranslationSurface) -> Self {
        let nv = ts.classes().len();
        let ne = ts.num_edge_pairs();
        let nc = ts.num_cells();
        let ends = |p: usize| {
            let e = ts.pair_edge(p);
            (ts.corner_class(e.cell, e.edge), ts.corner_class(e.cell, e.edge + 1))
        };
        let mut adj = vec![Vec::new(); nv];
        for p in 0..ne {
            let (a, b) = ends(p);
            adj[a].push((p, b));
            adj[b].push((p, a));
        }
        // primal tree, breadth first from class 0
        let mut in_tree = vec![false; ne];
        let mut parent_edge = vec![usize::MAX; nv];
        let mut order = Vec::with_capacity(nv);
        let mut seen = vec![false; nv];
        seen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &(p, w) in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    in_tree[p] = true;
                    parent_edge[w] = p;
                    queue.push_back(w);
                }
            }
        }
        // dual tree over cells avoiding the primal tree; `offset[c]` maps
        // cell frames into the developed frame of cell 0
        let mut in_dual = vec![false; ne];
        let mut offset = vec![Vec2::ZERO; nc];
        let mut cseen = vec![false; nc];
        cseen[0] = true;
        let mut queue = VecDeque::from([0usize]);
        while let Some(c) = queue.pop_front() {
            for i in 0..ts.cell(c).len() {
                let e = EdgeRef::new(c, i);
                let p = ts.edge_pair(e);
                if in_tree[p] {
                    continue;
                }
                let q = ts.partner(e);
                if !cseen[q.cell] {
                    cseen[q.cell] = true;
                    in_dual[p] = true;
                    offset[q.cell] = offset[c] - ts.shift(e);
                    queue.push_back(q.cell);
                }
            }
        }
        let leftover: Vec<usize> = (0..ne).filter(|&p| !in_tree[p] && !in_dual[p]).collect();

        // vertex links: a small counterclockwise loop around each class
        let mut star = vec![vec![0i64; ne]; nv];
        for (v, class) in ts.classes().iter().enumerate() {
            for &(c, i) in &class.corners {
                let n = ts.cell(c).len();
                let e = EdgeRef::new(c, (i + n - 1) % n);
                star[v][ts.edge_pair(e)] += exit_sign(ts, e);
            }
        }
        let reduce = |mut x: Vec<i64>| -> Vec<i64> {
            for &v in order.iter().skip(1) {
                let t = parent_edge[v];
                let s = star[v][t];
                debug_assert!(s == 1 || s == -1);
                let k = x[t] * s;
                if k != 0 {
                    for (xi, &si) in x.iter_mut().zip(&star[v]) {
                        *xi -= k * si;
                    }
                }
            }
            x
        };
        let mut matrix = vec![vec![0i64; ne]; leftover.len()];
        for p in 0..ne {
            let mut unit = vec![0i64; ne];
            unit[p] = 1;
            let r = reduce(unit);
            for (j, &l) in leftover.iter().enumerate() {
                matrix[j][p] = r[l];
            }
        }
        let periods = leftover
            .iter()
            .map(|&p| {
                // cross from the partner cell into the canonical cell, back through D
                let a = ts.pair_edge(p);
                let b = ts.partner(a);
                offset[b.cell] - offset[a.cell] - ts.shift(b)
            })
            .collect();
        Self { leftover, matrix, periods }
    }

    pub fn rank(&self) -> usize {
        self.leftover.len()
    }

    /// Holonomy `∫ ω` over each basis loop.
    pub fn periods(&self) -> &[Vec2] {
        &self.periods
    }

    pub fn coords(&self, crossings: &[i64]) -> HomologyVector {
        HomologyVector(self.matrix.iter().map(|row| row.iter().zip(crossings).map(|(a, b)| a * b).sum()).collect())
    }

    /// Real coordinates of a real crossing-rate vector.
    pub fn coords_f64(&self, crossings: &[f64]) -> Vec<f64> {
        self.matrix.iter().map(|row| row.iter().zip(crossings).map(|(&a, b)| a as f64 * b).sum()).collect()
    }

    /// Holonomy of a class.
    pub fn holonomy(&self, h: &[f64]) -> Vec2 {
        self.periods.iter().zip(h).fold(Vec2::ZERO, |acc, (&p, &c)| acc + c * p)
    }

    /// Asymptotic class per unit time of the flow in direction `u`: each edge
    /// pair with holonomy `v` is crossed at signed rate `(v × u) / area`.
    /// This is the dual of the horizontal part of `r_θ ω`.
    pub fn asymptotic_cycle(&self, ts: &TranslationSurface, u: Vec2) -> Vec<f64> {
        let rates: Vec<f64> = (0..ts.num_edge_pairs()).map(|p| ts.pair_vector(p).cross(u) / ts.area()).collect();
        self.coords_f64(&rates)
    }
}

/// Adds the signed edge crossings of a piece to `acc` (indexed by pair).
pub(crate) fn add_crossings(ts: &TranslationSurface, piece: &Piece, acc: &mut [i64]) {
    match piece.exit {
        PieceExit::Interior => {}
        PieceExit::Edge(c) => acc[c.pair] += i64::from(c.sign),
        PieceExit::Vertex { from, to } => {
            let mut cur = from;
            while cur != to {
                let n = ts.cell(cur.0).len();
                let e = EdgeRef::new(cur.0, (cur.1 + n - 1) % n);
                acc[ts.edge_pair(e)] += exit_sign(ts, e);
                cur = ts.next_corner_ccw(cur.0, cur.1);
            }
        }
    }
}

/// Class of the trajectory closed up through the dual tree.
pub fn homology_class(ts: &TranslationSurface, basis: &HomologyBasis, traj: &TrajectorySegment) -> HomologyVector {
    let mut x = vec![0i64; ts.num_edge_pairs()];
    for p in &traj.pieces {
        add_crossings(ts, p, &mut x);
    }
    basis.coords(&x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{direction, trace, FlowPoint};
    use crate::geometry::{make_polygon_from_angles, unfold};
    use crate::surface::square_torus;
    use num_rational::Rational64;

    #[test]
    fn torus_winding_numbers() {
        let t = square_torus();
        let b = HomologyBasis::new(&t);
        assert_eq!(b.rank(), 2);
        for (p, q) in [(1i64, 2i64), (3, 2), (-1, 4)] {
            let theta = -(q as f64).atan2(p as f64);
            let period = ((p * p + q * q) as f64).sqrt();
            let seg = trace(&t, FlowPoint::new(0, Vec2::new(0.31, 0.47)), theta, period).unwrap();
            let h = homology_class(&t, &b, &seg);
            let hol = b.holonomy(&h.to_f64());
            assert!((hol - Vec2::new(q as f64, p as f64)).norm() < 1e-9, "{h:?} {hol:?}");
            let mut abs: Vec<i64> = h.0.iter().map(|c| c.abs()).collect();
            abs.sort();
            let mut expect = vec![p.abs(), q.abs()];
            expect.sort();
            assert_eq!(abs, expect);
        }
    }

    #[test]
    fn empty_trajectory_is_zero() {
        let t = square_torus();
        let b = HomologyBasis::new(&t);
        let seg = trace(&t, FlowPoint::new(0, Vec2::new(0.5, 0.5)), 0.3, 0.0).unwrap();
        assert_eq!(homology_class(&t, &b, &seg).0, vec![0, 0]);
    }

    #[test]
    fn genus_two_holonomy_tracks_displacement() {
        let a: Vec<Rational64> = [(1, 8), (3, 8), (1, 2)].iter().map(|&(p, q)| Rational64::new(p, q)).collect();
        let ts = unfold(&make_polygon_from_angles(&a, 1.0, None).unwrap()).unwrap();
        let b = HomologyBasis::new(&ts);
        assert_eq!(b.rank(), 4);
        let c = ts.cell(0);
        let x = FlowPoint::new(0, (c[0] + c[1] + c[2]).scale(1.0 / 3.0));
        let theta = 0.377;
        let bound = 2.0 * ts.diameter_upper_bound();
        for t in [0.5, 3.0, 40.0, 400.0] {
            let seg = trace(&ts, x, theta, t).unwrap();
            let h = homology_class(&ts, &b, &seg);
            let hol = b.holonomy(&h.to_f64());
            assert!((hol - t * direction(theta)).norm() <= bound);
        }
    }

    #[test]
    fn additivity_up_to_closing() {
        let t = square_torus();
        let b = HomologyBasis::new(&t);
        let x = FlowPoint::new(0, Vec2::new(0.2, 0.9));
        let th = 0.4;
        let whole = homology_class(&t, &b, &trace(&t, x, th, 17.0).unwrap());
        let s1 = trace(&t, x, th, 6.0).unwrap();
        let h1 = homology_class(&t, &b, &s1);
        let h2 = homology_class(&t, &b, &trace(&t, s1.end, th, 11.0).unwrap());
        for j in 0..2 {
            assert_eq!(whole.0[j], h1.0[j] + h2.0[j]);
        }
    }
}
