use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use super::dd::DoubleDouble;
use super::RenormError;
use crate::geometry::Stratum;
use crate::linalg::{interior_angle, Vec2};
use crate::tol::Tolerances;

/// Pair of label orders for a `d`-interval exchange. Labels are `0..d`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    pub top: Vec<usize>,
    pub bottom: Vec<usize>,
}

impl Permutation {
    pub fn new(top: Vec<usize>, bottom: Vec<usize>) -> Result<Self, RenormError> {
        let d = top.len();
        if d < 2 || bottom.len() != d {
            return Err(RenormError::InvalidInput(format!(
                "top and bottom rows must have the same length >= 2 (got {} and {})",
                top.len(),
                bottom.len()
            )));
        }
        for row in [&top, &bottom] {
            let mut seen = vec![false; d];
            for &l in row {
                if l >= d || seen[l] {
                    return Err(RenormError::InvalidInput(format!("rows must be permutations of 0..{d}")));
                }
                seen[l] = true;
            }
        }
        Ok(Self { top, bottom })
    }

    /// Parses the one-row form: `"4321"` (digits) or `"4 3 2 1"`, giving the
    /// bottom order of labels `1..=d` over the identity top row.
    pub fn parse(s: &str) -> Result<Self, RenormError> {
        let s = s.trim();
        let tokens: Vec<&str> = if s.contains([' ', ',']) {
            s.split([' ', ',']).filter(|t| !t.is_empty()).collect()
        } else {
            s.split("").filter(|t| !t.is_empty()).collect()
        };
        let bottom = tokens
            .iter()
            .map(|t| match t.parse::<usize>() {
                Ok(v) if v >= 1 => Ok(v - 1),
                _ => Err(RenormError::InvalidInput(format!("bad permutation entry {t:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new((0..bottom.len()).collect(), bottom)
    }

    /// The symmetric permutation `d (d-1) ... 1`.
    pub fn reversal(d: usize) -> Self {
        Self { top: (0..d).collect(), bottom: (0..d).rev().collect() }
    }

    pub fn len(&self) -> usize {
        self.top.len()
    }

    pub fn is_empty(&self) -> bool {
        self.top.is_empty()
    }

    fn positions(row: &[usize]) -> Vec<usize> {
        let mut p = vec![0; row.len()];
        for (i, &l) in row.iter().enumerate() {
            p[l] = i;
        }
        p
    }

    /// No proper prefix of the top row is a prefix of the bottom row.
    pub fn is_irreducible(&self) -> bool {
        let d = self.len();
        let bpos = Self::positions(&self.bottom);
        let mut max_b = 0;
        for k in 0..d - 1 {
            max_b = max_b.max(bpos[self.top[k]]);
            if max_b == k {
                return false;
            }
        }
        true
    }

    /// Intersection matrix: `+1` when `a` precedes `b` on top and follows it on
    /// the bottom, `-1` for the reverse, `0` otherwise.
    pub fn omega(&self) -> Vec<Vec<i64>> {
        let d = self.len();
        let t = Self::positions(&self.top);
        let b = Self::positions(&self.bottom);
        let mut m = vec![vec![0; d]; d];
        for i in 0..d {
            for j in 0..d {
                if t[i] < t[j] && b[i] > b[j] {
                    m[i][j] = 1;
                } else if t[i] > t[j] && b[i] < b[j] {
                    m[i][j] = -1;
                }
            }
        }
        m
    }

    /// Genus of the suspension, half the rank of the intersection matrix.
    pub fn genus(&self) -> usize {
        integer_rank(self.omega()) / 2
    }

    /// Cone angles (multiples of `2π`) of the vertex classes of the suspension.
    pub fn cone_multiples(&self) -> Vec<usize> {
        let d = self.len();
        let t = Self::positions(&self.top);
        let b = Self::positions(&self.bottom);
        // suspension vector of label a: (1, bottom position - top position)
        let zeta = |a: usize| Vec2::new(1.0, b[a] as f64 - t[a] as f64);
        let mut bot_pts = vec![Vec2::new(0.0, 0.0)];
        for &a in &self.bottom {
            let last = *bot_pts.last().unwrap();
            bot_pts.push(last + zeta(a));
        }
        let mut top_pts = vec![Vec2::new(0.0, 0.0)];
        for &a in &self.top {
            let last = *top_pts.last().unwrap();
            top_pts.push(last + zeta(a));
        }
        // polygon vertex ids: bottom k -> k (0..=d), top j (1..d) -> d + j
        let top_id = |j: usize| if j == 0 { 0 } else if j == d { d } else { d + j };
        let n = 2 * d;
        let mut polygon: Vec<Vec2> = bot_pts.clone();
        for j in (1..d).rev() {
            polygon.push(top_pts[j]);
        }
        let poly_id = |i: usize| if i <= d { i } else { n - (i - d) };
        let mut uf: Vec<usize> = (0..n).collect();
        fn find(uf: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while uf[r] != r {
                r = uf[r];
            }
            uf[x] = r;
            r
        }
        for a in 0..d {
            for off in 0..2 {
                let x = find(&mut uf, top_id(t[a] + off));
                let y = find(&mut uf, b[a] + off);
                uf[x] = y;
            }
        }
        let mut angle = vec![0.0; n];
        for i in 0..n {
            let prev = polygon[(i + n - 1) % n];
            let next = polygon[(i + 1) % n];
            let r = find(&mut uf, poly_id(i));
            angle[r] += interior_angle(prev, polygon[i], next);
        }
        (0..n)
            .filter(|&i| find(&mut uf, i) == i)
            .map(|i| (angle[i] / TAU).round() as usize)
            .collect()
    }

    /// Stratum of the suspension (zeros of order zero are omitted).
    pub fn stratum(&self) -> Stratum {
        let mut zero_orders: Vec<usize> =
            self.cone_multiples().into_iter().filter(|&m| m > 1).map(|m| m - 1).collect();
        zero_orders.sort_unstable_by(|a, b| b.cmp(a));
        Stratum { zero_orders, genus: self.genus() }
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = self.len();
        let identity_top = self.top.iter().enumerate().all(|(i, &l)| i == l);
        let row = |r: &[usize], sep: &str| r.iter().map(|l| (l + 1).to_string()).collect::<Vec<_>>().join(sep);
        if identity_top && d <= 9 {
            write!(f, "{}", row(&self.bottom, ""))
        } else {
            write!(f, "{} / {}", row(&self.top, " "), row(&self.bottom, " "))
        }
    }
}

/// Rank over the rationals by fraction-free elimination.
fn integer_rank(mut m: Vec<Vec<i64>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut m: Vec<Vec<i128>> = m.drain(..).map(|r| r.into_iter().map(i128::from).collect()).collect();
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| m[r][c] != 0) else { continue };
        m.swap(rank, p);
        for r in 0..rows {
            if r != rank && m[r][c] != 0 {
                let (a, b) = (m[rank][c], m[r][c]);
                for k in 0..cols {
                    m[r][k] = m[r][k] * a - m[rank][k] * b;
                }
                let g = m[r].iter().fold(0i128, |g, &x| num_integer::gcd(g, x));
                if g > 1 {
                    m[r].iter_mut().for_each(|x| *x /= g);
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Interval exchange: a permutation with positive lengths indexed by label.
#[derive(Clone, Debug)]
pub struct Iet {
    pub(crate) perm: Permutation,
    pub(crate) lengths: Vec<DoubleDouble>,
    pub(crate) tol: Tolerances,
}

impl Iet {
    pub fn new(perm: Permutation, lengths: &[f64]) -> Result<Self, RenormError> {
        if lengths.len() != perm.len() {
            return Err(RenormError::InvalidInput(format!(
                "{} lengths for {} intervals",
                lengths.len(),
                perm.len()
            )));
        }
        if let Some(l) = lengths.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
            return Err(RenormError::InvalidInput(format!("interval length {l} is not positive")));
        }
        if !perm.is_irreducible() {
            return Err(RenormError::Reducible);
        }
        Ok(Self { perm, lengths: lengths.iter().map(|&l| DoubleDouble::new(l)).collect(), tol: Tolerances::default() })
    }

    pub fn from_f64(top: Vec<usize>, bottom: Vec<usize>, lengths: &[f64]) -> Result<Self, RenormError> {
        Self::new(Permutation::new(top, bottom)?, lengths)
    }

    /// Lengths drawn uniformly from the unit simplex.
    pub fn random<R: rand::Rng>(perm: Permutation, rng: &mut R) -> Result<Self, RenormError> {
        let raw: Vec<f64> = (0..perm.len()).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
        let s: f64 = raw.iter().sum();
        let lengths: Vec<f64> = raw.iter().map(|x| x / s).collect();
        Self::new(perm, &lengths)
    }

    pub fn with_tolerances(mut self, tol: Tolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn tolerances(&self) -> &Tolerances {
        &self.tol
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }

    /// Lengths by label.
    pub fn lengths(&self) -> Vec<f64> {
        self.lengths.iter().map(|l| l.to_f64()).collect()
    }

    pub fn total(&self) -> f64 {
        self.total_dd().to_f64()
    }

    pub(crate) fn total_dd(&self) -> DoubleDouble {
        self.lengths.iter().fold(DoubleDouble::ZERO, |s, &l| s + l)
    }

    /// Rescales to total length 1.
    pub fn normalize(&mut self) -> Result<(), RenormError> {
        let total = self.total_dd();
        for l in &mut self.lengths {
            *l = l.div(total);
        }
        let drift = (self.total_dd().to_f64() - 1.0).abs();
        if drift > self.tol.length_drift || self.lengths.iter().any(|l| l.hi <= 0.0) {
            return Err(RenormError::LengthDrift { drift });
        }
        Ok(())
    }

    /// Image of a point of `[0, total)` under the exchange.
    pub fn map(&self, x: f64) -> f64 {
        let d = self.len();
        let mut start = 0.0;
        let mut label = self.perm.top[d - 1];
        for &l in &self.perm.top {
            let len = self.lengths[l].to_f64();
            if x < start + len {
                label = l;
                break;
            }
            start += len;
        }
        let offset = x - start;
        let mut image = 0.0;
        for &l in &self.perm.bottom {
            if l == label {
                break;
            }
            image += self.lengths[l].to_f64();
        }
        image + offset
    }
}

impl Serialize for Iet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            top: &'a [usize],
            bottom: &'a [usize],
            lengths: Vec<f64>,
        }
        Repr { top: &self.perm.top, bottom: &self.perm.bottom, lengths: self.lengths() }.serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_forms() {
        let p = Permutation::parse("4321").unwrap();
        assert_eq!(p.bottom, vec![3, 2, 1, 0]);
        assert_eq!(Permutation::parse("4 3 2 1").unwrap(), p);
        assert_eq!(p.to_string(), "4321");
        assert!(Permutation::parse("4421").is_err());
        assert!(Permutation::parse("40").is_err());
    }

    #[test]
    fn irreducibility() {
        assert!(Permutation::parse("21").unwrap().is_irreducible());
        assert!(!Permutation::parse("12").unwrap().is_irreducible());
        assert!(!Permutation::parse("2143").unwrap().is_irreducible());
        assert!(Permutation::parse("4321").unwrap().is_irreducible());
        assert!(Permutation::parse("3142").unwrap().is_irreducible());
    }

    #[test]
    fn strata_of_symmetric_permutations() {
        let cases = [(2, "H(∅)", 1), (3, "H(∅)", 1), (4, "H(2)", 2), (5, "H(1,1)", 2), (6, "H(4)", 3), (7, "H(2,2)", 3)];
        for (d, name, g) in cases {
            let s = Permutation::reversal(d).stratum();
            assert_eq!(s.to_string(), name, "d = {d}");
            assert_eq!(s.genus, g);
            assert_eq!(s.zero_orders.iter().sum::<usize>(), 2 * g - 2);
        }
    }

    #[test]
    fn class_count_matches_dimension() {
        // d = 2g + s - 1 with s vertex classes
        for p in ["4321", "54321", "3142", "4132", "52341", "632541"] {
            let p = Permutation::parse(p).unwrap();
            if !p.is_irreducible() {
                continue;
            }
            let s = p.cone_multiples().len();
            assert_eq!(p.len(), 2 * p.genus() + s - 1, "{p}");
        }
    }

    #[test]
    fn map_of_rotation() {
        let iet = Iet::from_f64(vec![0, 1], vec![1, 0], &[0.7, 0.3]).unwrap();
        assert!((iet.map(0.1) - 0.4).abs() < 1e-15);
        assert!((iet.map(0.8) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_lengths() {
        let p = Permutation::parse("21").unwrap();
        assert!(Iet::new(p.clone(), &[1.0, 0.0]).is_err());
        assert!(Iet::new(p, &[1.0]).is_err());
        assert!(matches!(Iet::from_f64(vec![0, 1], vec![0, 1], &[1.0, 1.0]), Err(RenormError::Reducible)));
    }
}
