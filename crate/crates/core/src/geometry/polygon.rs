use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::{BigRational, Rational64};
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::f64::consts::PI;

use super::GeometryError;
use crate::linalg::Vec2;

/// Largest reflection group accepted before an input is declared irrational.
pub const GROUP_ORDER_CAP: usize = 4096;

/// An exact planar point.
pub type QPoint = [BigRational; 2];

/// A simple, counterclockwise polygon whose angles are rational multiples
/// of `π`.
#[derive(Clone, Debug, PartialEq)]
pub struct RationalPolygon {
    exact: Option<Vec<QPoint>>,
    vertices: Vec<Vec2>,
    /// Interior angle at each vertex in units of `π`, reduced.
    angles: Vec<Rational64>,
    /// Denominator lcm; the reflection group is dihedral of order `2n`.
    n: u64,
    /// Direction of edge `i` is `dir(edge 0) + dir_index[i]·π/n`, taken mod `2n`.
    dir_index: Vec<u64>,
}

impl RationalPolygon {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn exact_vertices(&self) -> Option<&[QPoint]> {
        self.exact.as_deref()
    }

    pub fn angles(&self) -> &[Rational64] {
        &self.angles
    }

    /// Angle at vertex `i` in units of `π/n`.
    pub fn angle_index(&self, i: usize) -> u64 {
        let a = self.angles[i];
        (a.numer() * (self.n as i64) / a.denom()) as u64
    }

    pub fn group_n(&self) -> u64 {
        self.n
    }

    pub fn dir_index(&self) -> &[u64] {
        &self.dir_index
    }

    pub fn area(&self) -> f64 {
        crate::linalg::polygon_area(&self.vertices)
    }

    pub fn exact_area(&self) -> Option<BigRational> {
        self.exact.as_ref().map(|v| exact_signed_area(v))
    }

    pub fn is_convex(&self) -> bool {
        (0..self.len()).all(|i| self.angle_index(i) < self.n)
    }
}

fn q(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

fn exact_signed_area(v: &[QPoint]) -> BigRational {
    let n = v.len();
    let mut s = BigRational::zero();
    for i in 0..n {
        let a = &v[i];
        let b = &v[(i + 1) % n];
        s += &a[0] * &b[1] - &a[1] * &b[0];
    }
    s / q(2)
}

fn exact_cross(o: &QPoint, a: &QPoint, b: &QPoint) -> BigRational {
    (&a[0] - &o[0]) * (&b[1] - &o[1]) - (&a[1] - &o[1]) * (&b[0] - &o[0])
}

fn sign<T: PartialOrd + Default>(x: T) -> i8 {
    let z = T::default();
    if x > z {
        1
    } else if x < z {
        -1
    } else {
        0
    }
}

/// Closed-segment intersection from orientation signs and a bounding box test
/// for the collinear case.
fn segments_meet(o: [i8; 4], collinear_overlap: impl Fn() -> bool) -> bool {
    let [d1, d2, d3, d4] = o;
    if d1 * d2 < 0 && d3 * d4 < 0 {
        return true;
    }
    if d1 == 0 || d2 == 0 || d3 == 0 || d4 == 0 {
        return collinear_overlap();
    }
    false
}

fn check_simple_exact(v: &[QPoint]) -> Result<(), GeometryError> {
    let n = v.len();
    let on_seg = |p: &QPoint, a: &QPoint, b: &QPoint| {
        exact_cross(a, b, p).is_zero()
            && p[0] >= a[0].clone().min(b[0].clone())
            && p[0] <= a[0].clone().max(b[0].clone())
            && p[1] >= a[1].clone().min(b[1].clone())
            && p[1] <= a[1].clone().max(b[1].clone())
    };
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = (&v[i], &v[(i + 1) % n]);
            let (c, d) = (&v[j], &v[(j + 1) % n]);
            let o = [
                sign(exact_cross(a, b, c)),
                sign(exact_cross(a, b, d)),
                sign(exact_cross(c, d, a)),
                sign(exact_cross(c, d, b)),
            ];
            let overlap = || on_seg(c, a, b) || on_seg(d, a, b) || on_seg(a, c, d) || on_seg(b, c, d);
            if segments_meet(o, overlap) {
                return Err(GeometryError::NonSimplePolygon(format!("edges {i} and {j} intersect")));
            }
        }
    }
    Ok(())
}

fn check_simple_float(v: &[Vec2]) -> Result<(), GeometryError> {
    let n = v.len();
    let scale = v.iter().map(|p| p.norm()).fold(1.0, f64::max);
    let eps = 1e-12 * scale * scale;
    let orient = |o: Vec2, a: Vec2, b: Vec2| {
        let c = (a - o).cross(b - o);
        if c > eps {
            1
        } else if c < -eps {
            -1
        } else {
            0
        }
    };
    let on_seg = |p: Vec2, a: Vec2, b: Vec2| crate::linalg::point_segment_distance(p, a, b) <= 1e-12 * scale;
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = (v[i], v[(i + 1) % n]);
            let (c, d) = (v[j], v[(j + 1) % n]);
            let o = [orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b)];
            let overlap = || on_seg(c, a, b) || on_seg(d, a, b) || on_seg(a, c, d) || on_seg(b, c, d);
            if segments_meet(o, overlap) {
                return Err(GeometryError::NonSimplePolygon(format!("edges {i} and {j} intersect")));
            }
        }
    }
    Ok(())
}

type QMat = [BigRational; 4];

fn qmat_mul(a: &QMat, b: &QMat) -> QMat {
    [
        &a[0] * &b[0] + &a[1] * &b[2],
        &a[0] * &b[1] + &a[1] * &b[3],
        &a[2] * &b[0] + &a[3] * &b[2],
        &a[2] * &b[1] + &a[3] * &b[3],
    ]
}

/// Reflection across the line spanned by `(a, b)`.
pub(crate) fn qreflection(a: &BigRational, b: &BigRational) -> QMat {
    let n = a * a + b * b;
    let two = q(2);
    [(a * a - b * b) / &n, &two * a * b / &n, &two * a * b / &n, (b * b - a * a) / &n]
}

pub(crate) fn qmat_identity() -> QMat {
    [q(1), q(0), q(0), q(1)]
}

pub(crate) fn qmat_apply(m: &QMat, p: &QPoint) -> QPoint {
    [&m[0] * &p[0] + &m[1] * &p[1], &m[2] * &p[0] + &m[3] * &p[1]]
}

pub(crate) fn edge_reflections(v: &[QPoint]) -> Vec<QMat> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let a = &v[(i + 1) % n][0] - &v[i][0];
            let b = &v[(i + 1) % n][1] - &v[i][1];
            qreflection(&a, &b)
        })
        .collect()
}

/// Order of the group generated by the edge reflections, or `None` once it
/// exceeds `cap`.
///
/// A rotation with rational entries and finite order has order 1, 2 or 4,
/// so a product of two generators whose fourth power is not the identity
/// already proves the group infinite.
fn exact_group_order(gens: &[QMat], cap: usize) -> Option<usize> {
    let id = qmat_identity();
    for g in &gens[1..] {
        let r = qmat_mul(g, &gens[0]);
        let r2 = qmat_mul(&r, &r);
        if qmat_mul(&r2, &r2) != id {
            return None;
        }
    }
    let mut seen: HashSet<QMat> = HashSet::new();
    let mut frontier = vec![qmat_identity()];
    seen.insert(qmat_identity());
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for m in &frontier {
            for g in gens {
                let p = qmat_mul(m, g);
                if !seen.contains(&p) {
                    if seen.len() >= cap {
                        return None;
                    }
                    seen.insert(p.clone());
                    next.push(p);
                }
            }
        }
        frontier = next;
    }
    Some(seen.len())
}

fn lcm_all(qs: impl Iterator<Item = i64>) -> i64 {
    qs.fold(1, |acc, x| acc.lcm(&x))
}

/// Builds a polygon from exact vertices, certifying that all angles are
/// rational multiples of `π`. Clockwise input is reversed.
pub fn make_rational_polygon(vertices: Vec<QPoint>) -> Result<RationalPolygon, GeometryError> {
    let n = vertices.len();
    if n < 3 {
        return Err(GeometryError::InvalidInput(format!("need at least 3 vertices, got {n}")));
    }
    let mut v = vertices;
    let area = exact_signed_area(&v);
    if area.is_zero() {
        return Err(GeometryError::Degenerate { vertex: 0, reason: "zero area".into() });
    }
    if area.is_negative() {
        v.reverse();
    }
    for i in 0..n {
        let prev = &v[(i + n - 1) % n];
        let next = &v[(i + 1) % n];
        if exact_cross(prev, &v[i], next).is_zero() {
            return Err(GeometryError::Degenerate { vertex: i, reason: "collinear or repeated vertices".into() });
        }
    }
    check_simple_exact(&v)?;
    let order = exact_group_order(&edge_reflections(&v), GROUP_ORDER_CAP)
        .ok_or(GeometryError::NonRationalAngle { cap: GROUP_ORDER_CAP })?;
    let nn = (order / 2) as u64;
    let fv: Vec<Vec2> = v
        .iter()
        .map(|p| Vec2::new(p[0].to_f64().unwrap_or(f64::NAN), p[1].to_f64().unwrap_or(f64::NAN)))
        .collect();
    let step = PI / nn as f64;
    let a0 = (fv[1] - fv[0]).angle();
    let mut dir_index = Vec::with_capacity(n);
    for i in 0..n {
        let d = (fv[(i + 1) % n] - fv[i]).angle() - a0;
        let k = (d / step).round();
        if (d - k * step).abs() > 1e-6 * step {
            return Err(GeometryError::NonRationalAngle { cap: GROUP_ORDER_CAP });
        }
        dir_index.push((k as i64).rem_euclid(2 * nn as i64) as u64);
    }
    let angles = angles_from_dirs(&dir_index, nn)?;
    Ok(RationalPolygon { exact: Some(v), vertices: fv, angles, n: nn, dir_index })
}

/// Interior angles (units of `π`) from the edge direction indices.
fn angles_from_dirs(dir: &[u64], nn: u64) -> Result<Vec<Rational64>, GeometryError> {
    let n = dir.len();
    let two_n = 2 * nn as i64;
    let mut angles = Vec::with_capacity(n);
    let mut total = 0i64;
    for i in 0..n {
        let mut t = (dir[i] as i64 - dir[(i + n - 1) % n] as i64).rem_euclid(two_n);
        if t > nn as i64 {
            t -= two_n;
        }
        let m = nn as i64 - t;
        if m <= 0 || m >= two_n || m == nn as i64 {
            return Err(GeometryError::Degenerate { vertex: i, reason: "straight or zero angle".into() });
        }
        total += m;
        angles.push(Rational64::new(m, nn as i64));
    }
    if total != (n as i64 - 2) * nn as i64 {
        return Err(GeometryError::AngleSumMismatch {
            expected: (n - 2).to_string(),
            got: Rational64::new(total, nn as i64).to_string(),
        });
    }
    Ok(angles)
}

/// Realizes a polygon from its interior angles (units of `π`) with the first
/// edge of length `base_edge` along the positive horizontal axis.
///
/// Triangles are determined by their angles. Larger polygons need all edge
/// lengths; they are rescaled so that edge 0 has length `base_edge`.
pub fn make_polygon_from_angles(
    angles: &[Rational64],
    base_edge: f64,
    edge_lengths: Option<&[f64]>,
) -> Result<RationalPolygon, GeometryError> {
    let n = angles.len();
    if n < 3 {
        return Err(GeometryError::InvalidInput(format!("need at least 3 angles, got {n}")));
    }
    if !(base_edge > 0.0 && base_edge.is_finite()) {
        return Err(GeometryError::InvalidInput(format!("base edge must be positive, got {base_edge}")));
    }
    for (i, a) in angles.iter().enumerate() {
        if *a <= Rational64::zero() || *a >= Rational64::from_integer(2) || *a == Rational64::from_integer(1) {
            return Err(GeometryError::Degenerate { vertex: i, reason: format!("angle {a}π out of range") });
        }
    }
    let sum: Rational64 = angles.iter().copied().sum();
    if sum != Rational64::from_integer(n as i64 - 2) {
        return Err(GeometryError::AngleSumMismatch { expected: (n - 2).to_string(), got: sum.to_string() });
    }
    let nn = lcm_all(angles.iter().map(|a| *a.denom())) as u64;
    let two_n = 2 * nn as i64;
    let mut dir_index = vec![0u64; n];
    for i in 1..n {
        let m = (angles[i] * Rational64::from_integer(nn as i64)).to_integer();
        dir_index[i] = (dir_index[i - 1] as i64 + nn as i64 - m).rem_euclid(two_n) as u64;
    }
    let lengths: Vec<f64> = if n == 3 {
        let s = |a: Rational64| (PI * a.to_f64().unwrap_or(f64::NAN)).sin();
        vec![base_edge, base_edge * s(angles[0]) / s(angles[2]), base_edge * s(angles[1]) / s(angles[2])]
    } else {
        let l = edge_lengths.ok_or_else(|| {
            GeometryError::InvalidInput("polygons with more than 3 vertices need edge lengths".into())
        })?;
        if l.len() != n || l.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(GeometryError::InvalidInput(format!("need {n} positive edge lengths")));
        }
        l.iter().map(|&x| x * base_edge / l[0]).collect()
    };
    let step = PI / nn as f64;
    let mut verts = Vec::with_capacity(n);
    let mut p = Vec2::ZERO;
    let perimeter: f64 = lengths.iter().sum();
    for i in 0..n {
        verts.push(p);
        let a = dir_index[i] as f64 * step;
        p += Vec2::new(a.cos(), a.sin()).scale(lengths[i]);
    }
    let gap = p.norm();
    if gap > 1e-9 * perimeter {
        return Err(GeometryError::NonClosingEdgeChain { gap });
    }
    check_simple_float(&verts)?;
    let angles = angles_from_dirs(&dir_index, nn)?;
    Ok(RationalPolygon { exact: None, vertices: verts, angles, n: nn, dir_index })
}

/// Parses `"3"`, `"-1/2"` or `"0.125"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational, GeometryError> {
    let t = s.trim();
    let bad = || GeometryError::InvalidInput(format!("not a rational number: {s:?}"));
    if let Some((a, b)) = t.split_once('/') {
        let a: BigInt = a.trim().parse().map_err(|_| bad())?;
        let b: BigInt = b.trim().parse().map_err(|_| bad())?;
        if b.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(a, b));
    }
    if let Some((ip, fp)) = t.split_once('.') {
        let neg = ip.starts_with('-');
        let ip = ip.trim_start_matches(['-', '+']);
        if !fp.chars().all(|c| c.is_ascii_digit()) || !ip.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{ip}{fp}");
        let num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
        let den = num_traits::pow(BigInt::from(10), fp.len());
        let r = BigRational::new(num, den);
        return Ok(if neg { -r } else { r });
    }
    let a: BigInt = t.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(a))
}

/// Polygon description as read from a spec file: either exact vertices or
/// angle data.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PolygonSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vertices: Option<Vec<[String; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_edge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge_lengths: Option<Vec<f64>>,
}

impl PolygonSpec {
    pub fn build(&self) -> Result<RationalPolygon, GeometryError> {
        match (&self.vertices, &self.angles) {
            (Some(v), None) => {
                let pts = v
                    .iter()
                    .map(|[x, y]| Ok([parse_rational(x)?, parse_rational(y)?]))
                    .collect::<Result<Vec<_>, GeometryError>>()?;
                make_rational_polygon(pts)
            }
            (None, Some(a)) => {
                let angles = a
                    .iter()
                    .map(|s| {
                        let r = parse_rational(s)?;
                        let (n, d) = (r.numer().to_i64(), r.denom().to_i64());
                        match (n, d) {
                            (Some(n), Some(d)) => Ok(Rational64::new(n, d)),
                            _ => Err(GeometryError::InvalidInput(format!("angle {s} too large"))),
                        }
                    })
                    .collect::<Result<Vec<_>, GeometryError>>()?;
                make_polygon_from_angles(&angles, self.base_edge.unwrap_or(1.0), self.edge_lengths.as_deref())
            }
            _ => Err(GeometryError::InvalidInput("give exactly one of `vertices` or `angles`".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(i64, i64)]) -> Vec<QPoint> {
        v.iter().map(|&(x, y)| [q(x), q(y)]).collect()
    }

    fn r(a: i64, b: i64) -> Rational64 {
        Rational64::new(a, b)
    }

    #[test]
    fn square_angles() {
        let p = make_rational_polygon(pts(&[(0, 0), (1, 0), (1, 1), (0, 1)])).unwrap();
        assert!(p.angles().iter().all(|&a| a == r(1, 2)));
        assert_eq!(p.group_n(), 2);
    }

    #[test]
    fn right_isoceles_angles() {
        let p = make_rational_polygon(pts(&[(0, 0), (1, 0), (1, 1)])).unwrap();
        assert_eq!(p.angles(), &[r(1, 4), r(1, 2), r(1, 4)]);
        assert_eq!(p.group_n(), 4);
    }

    #[test]
    fn clockwise_input_is_reversed() {
        let p = make_rational_polygon(pts(&[(0, 0), (0, 1), (1, 1), (1, 0)])).unwrap();
        assert!(p.area() > 0.0);
    }

    #[test]
    fn irrational_triangle_rejected() {
        let e = make_rational_polygon(pts(&[(0, 0), (3, 0), (3, 1)])).unwrap_err();
        assert_eq!(e, GeometryError::NonRationalAngle { cap: GROUP_ORDER_CAP });
    }

    #[test]
    fn collinear_and_self_intersecting_rejected() {
        assert!(matches!(
            make_rational_polygon(pts(&[(0, 0), (1, 0), (2, 0), (1, 1)])),
            Err(GeometryError::Degenerate { .. })
        ));
        assert!(matches!(
            make_rational_polygon(pts(&[(0, 0), (2, 0), (0, 2), (2, 2), (1, 3)])),
            Err(GeometryError::NonSimplePolygon(_))
        ));
    }

    #[test]
    fn l_shape_is_rational_nonconvex() {
        let p = make_rational_polygon(pts(&[(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])).unwrap();
        assert_eq!(p.angles()[3], r(3, 2));
        assert!(!p.is_convex());
        assert_eq!(p.group_n(), 2);
    }

    #[test]
    fn angle_realization() {
        let p = make_polygon_from_angles(&[r(1, 2), r(1, 4), r(1, 4)], 1.0, None).unwrap();
        let v = p.vertices();
        assert!((v[1] - Vec2::new(1.0, 0.0)).norm() < 1e-15);
        assert!((v[2] - Vec2::new(0.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn octagon_triangle_remeasured() {
        let a = [r(1, 8), r(3, 8), r(1, 2)];
        let p = make_polygon_from_angles(&a, 1.0, None).unwrap();
        let v = p.vertices();
        for i in 0..3 {
            let m = crate::linalg::interior_angle(v[(i + 2) % 3], v[i], v[(i + 1) % 3]);
            assert!((m - PI * a[i].to_f64().unwrap()).abs() < 1e-12);
        }
        assert_eq!(p.group_n(), 8);
    }

    #[test]
    fn angle_sum_mismatch() {
        let e = make_polygon_from_angles(&[r(1, 3), r(1, 3), r(1, 2)], 1.0, None).unwrap_err();
        assert!(matches!(e, GeometryError::AngleSumMismatch { .. }));
    }

    #[test]
    fn quadrilateral_needs_closing_lengths() {
        let a = [r(1, 2); 4];
        assert!(make_polygon_from_angles(&a, 1.0, Some(&[2.0, 1.0, 2.0, 1.0])).is_ok());
        assert!(matches!(
            make_polygon_from_angles(&a, 1.0, Some(&[2.0, 1.0, 1.0, 1.0])),
            Err(GeometryError::NonClosingEdgeChain { .. })
        ));
        assert!(make_polygon_from_angles(&a, 1.0, None).is_err());
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("3/8").unwrap(), BigRational::new(3.into(), 8.into()));
        assert_eq!(parse_rational("-0.25").unwrap(), BigRational::new((-1).into(), 4.into()));
        assert_eq!(parse_rational(" 7 ").unwrap(), q(7));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }
}
