use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use super::quad::gauss_legendre;
use super::FlowError;
use crate::linalg::{Mat2, Vec2};
use crate::surface::TranslationSurface;

/// Observable description as read from a spec file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ObservableSpec {
    Constant {
        value: f64,
    },
    /// `c + a·x + b·y` in cell coordinates.
    Linear {
        a: f64,
        b: f64,
        #[serde(default)]
        c: f64,
    },
    /// `Σ a·cos 2π(kx·x + ky·y) + b·sin 2π(kx·x + ky·y)` with rows
    /// `[kx, ky, a, b]`, optionally restricted to some cells.
    Trig {
        coeffs: Vec<[f64; 4]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cells: Option<Vec<usize>>,
    },
    /// `amplitude·(1 - r²/σ²)⁴` for `r < σ` around `center` in `cell`.
    Bump {
        cell: usize,
        center: [f64; 2],
        sigma: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Sum {
        terms: Vec<ObservableSpec>,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Constant(f64),
    Linear { a: f64, b: f64, c: f64 },
    Trig { coeffs: Vec<[f64; 4]>, cells: Option<Vec<bool>> },
    Bump { cell: usize, center: Vec2, sigma: f64, amplitude: f64 },
}

impl Term {
    fn eval(&self, cell: usize, p: Vec2) -> f64 {
        match self {
            Term::Constant(c) => *c,
            Term::Linear { a, b, c } => c + a * p.x + b * p.y,
            Term::Trig { coeffs, cells } => {
                if cells.as_ref().is_some_and(|m| !m.get(cell).copied().unwrap_or(false)) {
                    return 0.0;
                }
                coeffs
                    .iter()
                    .map(|&[kx, ky, a, b]| {
                        let (s, c) = (TAU * (kx * p.x + ky * p.y)).sin_cos();
                        a * c + b * s
                    })
                    .sum()
            }
            Term::Bump { cell: bc, center, sigma, amplitude } => {
                if *bc != cell {
                    return 0.0;
                }
                let w = 1.0 - (p - *center).norm2() / (sigma * sigma);
                if w <= 0.0 {
                    0.0
                } else {
                    amplitude * w.powi(4)
                }
            }
        }
    }

    fn grad(&self, cell: usize, p: Vec2) -> Vec2 {
        match self {
            Term::Constant(_) => Vec2::ZERO,
            Term::Linear { a, b, .. } => Vec2::new(*a, *b),
            Term::Trig { coeffs, cells } => {
                if cells.as_ref().is_some_and(|m| !m.get(cell).copied().unwrap_or(false)) {
                    return Vec2::ZERO;
                }
                let mut g = Vec2::ZERO;
                for &[kx, ky, a, b] in coeffs {
                    let (s, c) = (TAU * (kx * p.x + ky * p.y)).sin_cos();
                    let d = TAU * (b * c - a * s);
                    g += Vec2::new(kx * d, ky * d);
                }
                g
            }
            Term::Bump { cell: bc, center, sigma, amplitude } => {
                if *bc != cell {
                    return Vec2::ZERO;
                }
                let d = p - *center;
                let s2 = sigma * sigma;
                let w = 1.0 - d.norm2() / s2;
                if w <= 0.0 {
                    Vec2::ZERO
                } else {
                    (-8.0 * amplitude * w.powi(3) / s2) * d
                }
            }
        }
    }

    /// Shortest length scale on which the term varies.
    fn length_scale(&self) -> f64 {
        match self {
            Term::Constant(_) | Term::Linear { .. } => f64::INFINITY,
            Term::Trig { coeffs, .. } => coeffs
                .iter()
                .map(|&[kx, ky, _, _]| 1.0 / kx.hypot(ky))
                .fold(f64::INFINITY, f64::min),
            Term::Bump { sigma, .. } => *sigma,
        }
    }
}

/// A scalar function on a translation surface, given cell by cell with its
/// gradient.
///
/// `frame` maps current cell coordinates to the coordinates the terms were
/// written in, so an observable can be carried along a linear action on the
/// surface.
#[derive(Clone, Debug, PartialEq)]
pub struct Observable {
    terms: Vec<Term>,
    frame: Mat2,
    offset: f64,
}

impl Observable {
    pub fn new(terms: Vec<Term>) -> Self {
        Self { terms, frame: Mat2::IDENTITY, offset: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![Term::Constant(c)])
    }

    /// Builds and validates an observable for `ts`: cells must exist and
    /// bumps must be supported inside their cell.
    pub fn from_spec(spec: &ObservableSpec, ts: &TranslationSurface) -> Result<Self, FlowError> {
        let mut terms = Vec::new();
        collect(spec, ts, &mut terms)?;
        Ok(Self::new(terms))
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    #[inline]
    pub fn eval(&self, cell: usize, p: Vec2) -> f64 {
        let q = self.frame.apply(p);
        self.terms.iter().map(|t| t.eval(cell, q)).sum::<f64>() - self.offset
    }

    /// Gradient in current cell coordinates.
    pub fn grad(&self, cell: usize, p: Vec2) -> Vec2 {
        let q = self.frame.apply(p);
        let mut g = Vec2::ZERO;
        for t in &self.terms {
            g += t.grad(cell, q);
        }
        self.frame.transpose().apply(g)
    }

    /// The same function on `m·S`: `f'(m p) = f(p)`.
    pub fn transported(&self, m: &Mat2) -> Self {
        let inv = m.inverse().expect("invertible linear map");
        Self { terms: self.terms.clone(), frame: self.frame.mul(&inv), offset: self.offset }
    }

    /// Subtracts the mean over `ts`.
    pub fn mean_zero(mut self, ts: &TranslationSurface) -> Self {
        self.offset = 0.0;
        let m = super::area_integral(ts, &self) / ts.area();
        self.offset = m;
        self
    }

    pub fn length_scale(&self) -> f64 {
        let s = self.terms.iter().map(Term::length_scale).fold(f64::INFINITY, f64::min);
        // the frame can compress features by up to its largest singular value
        let f = &self.frame;
        let n = (f.a * f.a + f.b * f.b + f.c * f.c + f.d * f.d).sqrt();
        s / n.max(1e-300)
    }

    /// `∫ f dA` in closed form when every term allows it.
    pub fn exact_integral(&self, ts: &TranslationSurface) -> Option<f64> {
        let det = self.frame.det().abs();
        let mut total = -self.offset * ts.area();
        for t in &self.terms {
            total += match t {
                Term::Constant(c) => c * ts.area(),
                Term::Linear { a, b, c } => {
                    // linear in current coordinates with gradient frameᵀ(a, b)
                    let g = self.frame.transpose().apply(Vec2::new(*a, *b));
                    (0..ts.num_cells())
                        .map(|k| {
                            let (area, centroid) = cell_moments(ts.cell(k));
                            area * (c + g.dot(centroid))
                        })
                        .sum()
                }
                Term::Bump { sigma, amplitude, .. } => amplitude * PI * sigma * sigma / 5.0 / det,
                Term::Trig { .. } => return None,
            };
        }
        Some(total)
    }

    /// `∫ f` along the straight segment `a → b` in `cell`, with an `order`
    /// point rule. Bumps are integrated over their chord only, which makes
    /// them exact for `order ≥ 5`.
    pub fn line_integral(&self, cell: usize, a: Vec2, b: Vec2, order: usize) -> f64 {
        let len = (b - a).norm();
        if len == 0.0 {
            return 0.0;
        }
        let g = gauss_legendre(order);
        let qa = self.frame.apply(a);
        let qb = self.frame.apply(b);
        let mut total = -self.offset * len;
        let mut smooth: Vec<&Term> = Vec::new();
        for t in &self.terms {
            match t {
                Term::Bump { cell: bc, center, sigma, .. } => {
                    if *bc != cell {
                        continue;
                    }
                    if let Some((s0, s1)) = chord(qa, qb, *center, *sigma) {
                        let w = (s1 - s0) * len;
                        total += w * g.integrate(|x| {
                            let s = s0 + (s1 - s0) * x;
                            t.eval(cell, qa + s * (qb - qa))
                        });
                    }
                }
                Term::Constant(c) => total += c * len,
                Term::Linear { a: ca, b: cb, c } => {
                    let m = 0.5 * (qa + qb);
                    total += len * (c + ca * m.x + cb * m.y);
                }
                _ => smooth.push(t),
            }
        }
        if !smooth.is_empty() {
            total += len
                * g.integrate(|x| {
                    let q = qa + x * (qb - qa);
                    smooth.iter().map(|t| t.eval(cell, q)).sum::<f64>()
                });
        }
        total
    }
}

/// Parameter range of `a + s(b - a)`, `s ∈ [0, 1]`, inside the disk.
fn chord(a: Vec2, b: Vec2, c: Vec2, r: f64) -> Option<(f64, f64)> {
    let d = b - a;
    let f = a - c;
    let qa = d.norm2();
    let qb = 2.0 * f.dot(d);
    let qc = f.norm2() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    if disc <= 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let s0 = ((-qb - sq) / (2.0 * qa)).max(0.0);
    let s1 = ((-qb + sq) / (2.0 * qa)).min(1.0);
    (s1 > s0).then_some((s0, s1))
}

fn cell_moments(pts: &[Vec2]) -> (f64, Vec2) {
    let n = pts.len();
    let mut a = 0.0;
    let mut c = Vec2::ZERO;
    for i in 0..n {
        let (p, q) = (pts[i], pts[(i + 1) % n]);
        let w = p.cross(q);
        a += w;
        c += w * (p + q);
    }
    (0.5 * a, c.scale(1.0 / (3.0 * a)))
}

fn collect(spec: &ObservableSpec, ts: &TranslationSurface, out: &mut Vec<Term>) -> Result<(), FlowError> {
    match spec {
        ObservableSpec::Constant { value } => out.push(Term::Constant(*value)),
        ObservableSpec::Linear { a, b, c } => out.push(Term::Linear { a: *a, b: *b, c: *c }),
        ObservableSpec::Trig { coeffs, cells } => {
            let mask = match cells {
                None => None,
                Some(cs) => {
                    let mut m = vec![false; ts.num_cells()];
                    for &c in cs {
                        *m.get_mut(c).ok_or_else(|| FlowError::InvalidArgument(format!("no cell {c}")))? = true;
                    }
                    Some(m)
                }
            };
            out.push(Term::Trig { coeffs: coeffs.clone(), cells: mask });
        }
        ObservableSpec::Bump { cell, center, sigma, amplitude } => {
            if *cell >= ts.num_cells() {
                return Err(FlowError::InvalidArgument(format!("no cell {cell}")));
            }
            if !(*sigma > 0.0) {
                return Err(FlowError::InvalidArgument("bump width must be positive".into()));
            }
            let c = Vec2::new(center[0], center[1]);
            let pts = ts.cell(*cell);
            let n = pts.len();
            for i in 0..n {
                let a = pts[i];
                let ev = pts[(i + 1) % n] - a;
                if ev.cross(c - a) / ev.norm() < *sigma {
                    return Err(FlowError::InvalidArgument(format!(
                        "bump of width {sigma} at {center:?} is not supported inside cell {cell}"
                    )));
                }
            }
            out.push(Term::Bump { cell: *cell, center: c, sigma: *sigma, amplitude: *amplitude });
        }
        ObservableSpec::Sum { terms } => {
            for t in terms {
                collect(t, ts, out)?;
            }
        }
    }
    Ok(())
}
