use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt;

use super::group::{reflection_group, GroupElement};
use super::polygon::{edge_reflections, qmat_apply, qmat_identity, QPoint};
use super::{GeometryError, RationalPolygon};
use crate::linalg::Vec2;
use crate::surface::{EdgeRef, TranslationSurface};
use crate::tol::Tolerances;

/// Zero orders and genus of a translation surface.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Stratum {
    /// Orders in nonincreasing order.
    pub zero_orders: Vec<usize>,
    pub genus: usize,
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.zero_orders.is_empty() {
            return write!(f, "H(∅)");
        }
        let parts: Vec<String> = self.zero_orders.iter().map(|k| k.to_string()).collect();
        write!(f, "H({})", parts.join(","))
    }
}

pub fn stratum(ts: &TranslationSurface) -> Result<Stratum, GeometryError> {
    let tol = ts.tolerances().audit;
    let mut orders = Vec::new();
    for (i, c) in ts.classes().iter().enumerate() {
        let m = c.angle / TAU;
        if (m - m.round()).abs() > tol * m.max(1.0) || m.round() < 1.0 {
            return Err(GeometryError::InconsistentAngles { class: i, angle: c.angle });
        }
        let k = m.round() as usize - 1;
        if k > 0 {
            orders.push(k);
        }
    }
    orders.sort_unstable_by(|a, b| b.cmp(a));
    let total: usize = orders.iter().sum();
    if total % 2 != 0 {
        return Err(GeometryError::InconsistentAngles { class: 0, angle: f64::NAN });
    }
    Ok(Stratum { zero_orders: orders, genus: total / 2 + 1 })
}

/// Splits a simple counterclockwise polygon into triangles by ear clipping.
/// `orient(i, j, k)` is the sign of the turn `i → j → k`.
fn ear_clip(n: usize, orient: impl Fn(usize, usize, usize) -> i8) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut out = Vec::with_capacity(n - 2);
    while idx.len() > 3 {
        let m = idx.len();
        let ear = (0..m).find(|&i| {
            let (a, b, c) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            if orient(a, b, c) <= 0 {
                return false;
            }
            idx.iter().all(|&p| {
                p == a || p == b || p == c || !(orient(a, b, p) >= 0 && orient(b, c, p) >= 0 && orient(c, a, p) >= 0)
            })
        });
        let i = ear.expect("a simple polygon always has an ear");
        let (a, b, c) = (idx[(i + idx.len() - 1) % idx.len()], idx[i], idx[(i + 1) % idx.len()]);
        out.push(vec![a, b, c]);
        idx.remove(i);
    }
    out.push(idx);
    out
}

fn convex_pieces(p: &RationalPolygon) -> Vec<Vec<usize>> {
    let n = p.len();
    if p.is_convex() {
        return vec![(0..n).collect()];
    }
    match p.exact_vertices() {
        Some(v) => ear_clip(n, |i, j, k| {
            let c: BigRational =
                (&v[j][0] - &v[i][0]) * (&v[k][1] - &v[i][1]) - (&v[j][1] - &v[i][1]) * (&v[k][0] - &v[i][0]);
            if c.is_zero() {
                0
            } else if c.is_positive() {
                1
            } else {
                -1
            }
        }),
        None => {
            let v = p.vertices();
            let scale = v.iter().map(|x| x.norm()).fold(1.0, f64::max);
            ear_clip(n, |i, j, k| {
                let c = (v[j] - v[i]).cross(v[k] - v[i]);
                if c.abs() <= 1e-13 * scale * scale {
                    0
                } else if c > 0.0 {
                    1
                } else {
                    -1
                }
            })
        }
    }
}

/// The translation surface obtained by unfolding the billiard table `p`: one
/// copy of `p` per element of its reflection group, the copy for `g` glued
/// along edge `i` to the copy for `g ∘ ρ_i`.
///
/// Copy 0 is `p` itself, so directions on the surface are measured in the
/// frame of the table. Nonconvex tables are cut into triangles first.
pub fn unfold(p: &RationalPolygon) -> Result<TranslationSurface, GeometryError> {
    unfold_with(p, Tolerances::default())
}

pub fn unfold_with(p: &RationalPolygon, tol: Tolerances) -> Result<TranslationSurface, GeometryError> {
    let group = reflection_group(p);
    let n = group.n;
    let nv = p.len();
    let pieces = convex_pieces(p);
    // owner of each directed polygon chord (a, b): (piece, piece edge)
    let mut owner: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for (pi, piece) in pieces.iter().enumerate() {
        let r = piece.len();
        for e in 0..r {
            owner.insert((piece[e], piece[(e + 1) % r]), (pi, e));
        }
    }
    let copy_of: HashMap<GroupElement, usize> = group.elements.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    let np = pieces.len();
    let cell_id = |copy: usize, piece: usize| copy * np + piece;
    // piece edge index → cell edge index for an orientation reversing copy
    let edge_in_cell = |g: GroupElement, piece: usize, e: usize| {
        let r = pieces[piece].len();
        if g.reflect {
            (2 * r - 2 - e) % r
        } else {
            e
        }
    };

    let exact_mats = p.exact_vertices().map(|v| exact_copy_matrices(v, &group.elements, &group.generators, n));
    let alpha0 = (p.vertices()[1] - p.vertices()[0]).angle();
    let mut cells = Vec::with_capacity(group.order() * np);
    for (ci, &g) in group.elements.iter().enumerate() {
        let place: Box<dyn Fn(usize) -> Vec2> = match (&exact_mats, p.exact_vertices()) {
            (Some(ms), Some(v)) => {
                let m = &ms[ci];
                Box::new(move |i: usize| {
                    let q = qmat_apply(m, &v[i]);
                    Vec2::new(q[0].to_f64().unwrap_or(f64::NAN), q[1].to_f64().unwrap_or(f64::NAN))
                })
            }
            _ => {
                let m = g.matrix(n, alpha0);
                let v = p.vertices();
                Box::new(move |i: usize| m.apply(v[i]))
            }
        };
        for piece in &pieces {
            let mut pts: Vec<Vec2> = piece.iter().map(|&i| place(i)).collect();
            if g.reflect {
                pts.reverse();
            }
            cells.push(pts);
        }
    }

    let mut gluings = Vec::new();
    for (ci, &g) in group.elements.iter().enumerate() {
        for (pi, piece) in pieces.iter().enumerate() {
            let r = piece.len();
            for e in 0..r {
                let (a, b) = (piece[e], piece[(e + 1) % r]);
                let here = EdgeRef::new(cell_id(ci, pi), edge_in_cell(g, pi, e));
                let there = if b == (a + 1) % nv {
                    let h = g.compose(group.generators[a], n);
                    let cj = copy_of[&h];
                    EdgeRef::new(cell_id(cj, pi), edge_in_cell(h, pi, e))
                } else {
                    let (qi, f) = owner[&(b, a)];
                    EdgeRef::new(cell_id(ci, qi), edge_in_cell(g, qi, f))
                };
                if here < there {
                    gluings.push((here, there));
                }
            }
        }
    }
    let ts = TranslationSurface::new(cells, &gluings, &[], tol)?;
    audit_angles(p, &ts, &pieces, &group.elements)?;
    Ok(ts)
}

/// Exact linear part of each copy, built from products of exact edge
/// reflections along the breadth-first tree of the group.
fn exact_copy_matrices(
    v: &[QPoint],
    elements: &[GroupElement],
    generators: &[GroupElement],
    n: u64,
) -> Vec<[BigRational; 4]> {
    let refl = edge_reflections(v);
    let mut mats: HashMap<GroupElement, [BigRational; 4]> = HashMap::new();
    mats.insert(GroupElement::IDENTITY, qmat_identity());
    for &g in elements {
        let m = mats[&g].clone();
        for (i, &r) in generators.iter().enumerate() {
            let h = g.compose(r, n);
            mats.entry(h).or_insert_with(|| {
                let a = &m;
                let b = &refl[i];
                [
                    &a[0] * &b[0] + &a[1] * &b[2],
                    &a[0] * &b[1] + &a[1] * &b[3],
                    &a[2] * &b[0] + &a[3] * &b[2],
                    &a[2] * &b[1] + &a[3] * &b[3],
                ]
            });
        }
    }
    elements.iter().map(|g| mats[g].clone()).collect()
}

/// Integer audit of the cone angles: each class collects whole polygon
/// angles in units of `π/n` and must total a multiple of `2n`.
fn audit_angles(
    p: &RationalPolygon,
    ts: &TranslationSurface,
    pieces: &[Vec<usize>],
    elements: &[GroupElement],
) -> Result<(), GeometryError> {
    let n = p.group_n();
    let np = pieces.len();
    let mut totals = vec![0u64; ts.classes().len()];
    for (ci, g) in elements.iter().enumerate() {
        for v in 0..p.len() {
            let (pi, k) = pieces
                .iter()
                .enumerate()
                .find_map(|(pi, piece)| piece.iter().position(|&x| x == v).map(|k| (pi, k)))
                .expect("every vertex lies in some piece");
            let r = pieces[pi].len();
            let corner = if g.reflect { r - 1 - k } else { k };
            totals[ts.corner_class(ci * np + pi, corner)] += p.angle_index(v);
        }
    }
    for (class, &t) in totals.iter().enumerate() {
        if t == 0 || t % (2 * n) != 0 {
            return Err(GeometryError::InconsistentAngles {
                class,
                angle: t as f64 * std::f64::consts::PI / n as f64,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_polygon_from_angles, make_rational_polygon, reflection_group};
    use crate::surface::systole;
    use num_bigint::BigInt;
    use num_rational::Rational64;

    fn qpts(v: &[(i64, i64)]) -> Vec<QPoint> {
        v.iter()
            .map(|&(x, y)| [BigRational::from_integer(BigInt::from(x)), BigRational::from_integer(BigInt::from(y))])
            .collect()
    }

    fn angles(a: &[(i64, i64)]) -> RationalPolygon {
        let a: Vec<Rational64> = a.iter().map(|&(p, q)| Rational64::new(p, q)).collect();
        make_polygon_from_angles(&a, 1.0, None).unwrap()
    }

    /// Genus from the Euler characteristic of the cell complex.
    fn euler_genus(ts: &TranslationSurface) -> usize {
        let v = ts.classes().len() as i64;
        let e = ts.num_edge_pairs() as i64;
        let f = ts.num_cells() as i64;
        ((2 - (v - e + f)) / 2) as usize
    }

    #[test]
    fn square_unfolds_to_torus() {
        let p = make_rational_polygon(qpts(&[(0, 0), (1, 0), (1, 1), (0, 1)])).unwrap();
        let ts = unfold(&p).unwrap();
        assert_eq!(ts.num_cells(), 4);
        assert!((ts.area() - 4.0).abs() < 1e-12);
        let s = stratum(&ts).unwrap();
        assert_eq!(s.genus, 1);
        assert!(s.zero_orders.is_empty());
        assert_eq!(s.to_string(), "H(∅)");
        assert_eq!(euler_genus(&ts), 1);
        assert!((systole(&ts).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn octagon_triangle_is_h2() {
        let p = angles(&[(1, 8), (3, 8), (1, 2)]);
        let ts = unfold(&p).unwrap();
        assert_eq!(ts.num_cells(), 16);
        assert!((ts.area() - 16.0 * p.area()).abs() < 1e-12);
        let s = stratum(&ts).unwrap();
        assert_eq!(s.zero_orders, vec![2]);
        assert_eq!(s.genus, 2);
        assert_eq!(euler_genus(&ts), 2);
        assert_eq!(s.to_string(), "H(2)");
        let cone: Vec<f64> = ts.classes().iter().filter(|c| c.is_singular()).map(|c| c.angle).collect();
        assert_eq!(cone.len(), 1);
        assert!((cone[0] - 3.0 * TAU).abs() < 1e-9);
    }

    #[test]
    fn integrable_triangle_is_torus() {
        let p = make_rational_polygon(qpts(&[(0, 0), (1, 0), (1, 1)])).unwrap();
        let ts = unfold(&p).unwrap();
        assert_eq!(stratum(&ts).unwrap().genus, 1);
        assert_eq!(ts.num_cells(), 8);
        assert!(ts.classes().iter().all(|c| (c.angle - TAU).abs() < 1e-9));
    }

    #[test]
    fn exact_area_is_group_order_times_table() {
        let p = make_rational_polygon(qpts(&[(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])).unwrap();
        let g = reflection_group(&p);
        let ts = unfold(&p).unwrap();
        let exact = p.exact_area().unwrap() * BigRational::from_integer(BigInt::from(g.order()));
        assert!((ts.area() - exact.to_f64().unwrap()).abs() < 1e-12);
        // The L-shaped table has one reflex vertex of angle 3π/2; it unfolds
        // to a genus-2 surface with a single 6π cone point.
        let s = stratum(&ts).unwrap();
        assert_eq!(s.zero_orders, vec![2]);
    }

    #[test]
    fn gauss_bonnet() {
        for a in [
            vec![(1, 8), (3, 8), (1, 2)],
            vec![(1, 5), (2, 5), (2, 5)],
            vec![(1, 7), (2, 7), (4, 7)],
            vec![(1, 10), (2, 5), (1, 2)],
        ] {
            let ts = unfold(&angles(&a)).unwrap();
            let s = stratum(&ts).unwrap();
            let excess: f64 = ts.classes().iter().map(|c| c.angle - TAU).sum();
            assert!((excess - TAU * (2.0 * s.genus as f64 - 2.0)).abs() < 1e-8);
            assert_eq!(euler_genus(&ts), s.genus);
        }
    }
}
