use super::observable::Observable;
use super::quad::gauss_legendre;
use super::tracer::TrajectorySegment;
use crate::linalg::Vec2;
use crate::surface::TranslationSurface;

/// Default number of Gauss–Legendre nodes per trajectory piece.
pub const PIECE_ORDER: usize = 8;

/// `∫_0^T f(φ_t x) dt` along a traced segment.
pub fn birkhoff_integral(traj: &TrajectorySegment, f: &Observable) -> f64 {
    birkhoff_integral_with(traj, f, PIECE_ORDER)
}

pub fn birkhoff_integral_with(traj: &TrajectorySegment, f: &Observable, order: usize) -> f64 {
    traj.pieces.iter().map(|p| f.line_integral(p.cell, p.start, p.end, order)).sum()
}

/// Area quadrature: each cell is fanned into triangles, each triangle is
/// split until its diameter is at most `max_diameter`, and every piece gets
/// a collapsed `points × points` Gauss–Legendre rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AreaRule {
    pub points: usize,
    /// `None` picks a quarter of the observable's length scale.
    pub max_diameter: Option<f64>,
}

impl Default for AreaRule {
    fn default() -> Self {
        Self { points: 4, max_diameter: None }
    }
}

/// `∫ f dA`, exact for families with closed-form integrals.
pub fn area_integral(ts: &TranslationSurface, f: &Observable) -> f64 {
    f.exact_integral(ts).unwrap_or_else(|| area_integral_with(ts, f, AreaRule::default()))
}

/// `∫ f dA` by quadrature only.
pub fn area_integral_with(ts: &TranslationSurface, f: &Observable, rule: AreaRule) -> f64 {
    let h = rule.max_diameter.unwrap_or(0.25 * f.length_scale());
    integrate_cells(ts, rule.points, h, |c, p| f.eval(c, p))
}

/// `(‖f‖² + ‖∂_x f‖² + ‖∂_y f‖²)^{1/2}` with `L²` norms for the flat area.
pub fn sobolev_norm(ts: &TranslationSurface, f: &Observable) -> f64 {
    sobolev_norm_with(ts, f, AreaRule::default())
}

pub fn sobolev_norm_with(ts: &TranslationSurface, f: &Observable, rule: AreaRule) -> f64 {
    let h = rule.max_diameter.unwrap_or(0.25 * f.length_scale());
    integrate_cells(ts, rule.points, h, |c, p| {
        let v = f.eval(c, p);
        v * v + f.grad(c, p).norm2()
    })
    .sqrt()
}

fn integrate_cells(ts: &TranslationSurface, n: usize, h: f64, mut g: impl FnMut(usize, Vec2) -> f64) -> f64 {
    let mut total = 0.0;
    for c in 0..ts.num_cells() {
        let pts = ts.cell(c);
        for k in 1..pts.len() - 1 {
            total += triangle(pts[0], pts[k], pts[k + 1], n, h, &mut |p| g(c, p));
        }
    }
    total
}

fn triangle(a: Vec2, b: Vec2, c: Vec2, n: usize, h: f64, g: &mut impl FnMut(Vec2) -> f64) -> f64 {
    let diam = a.dist(b).max(b.dist(c)).max(c.dist(a));
    if h.is_finite() && diam > h {
        let (ab, bc, ca) = (0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a));
        return triangle(a, ab, ca, n, h, g)
            + triangle(ab, b, bc, n, h, g)
            + triangle(ca, bc, c, n, h, g)
            + triangle(ab, bc, ca, n, h, g);
    }
    // p(u, v) = a + u(b - a) + uv(c - b), Jacobian 2·area·u
    let rule = gauss_legendre(n);
    let jac = (b - a).cross(c - b).abs();
    let mut s = 0.0;
    for (&u, &wu) in rule.nodes.iter().zip(&rule.weights) {
        for (&v, &wv) in rule.nodes.iter().zip(&rule.weights) {
            let p = a + u * (b - a) + (u * v) * (c - b);
            s += wu * wv * u * g(p);
        }
    }
    s * jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{trace, FlowPoint, ObservableSpec, Term};
    use crate::linalg::Mat2;
    use crate::surface::square_torus;

    fn trig(coeffs: Vec<[f64; 4]>) -> Observable {
        Observable::new(vec![Term::Trig { coeffs, cells: None }])
    }

    #[test]
    fn constant_birkhoff_is_time() {
        let t = square_torus();
        let seg = trace(&t, FlowPoint::new(0, Vec2::new(0.3, 0.3)), 0.77, 123.4).unwrap();
        assert!((birkhoff_integral(&seg, &Observable::constant(1.0)) - 123.4).abs() < 1e-9);
    }

    #[test]
    fn area_moments() {
        let t = square_torus();
        assert!((area_integral(&t, &Observable::constant(1.0)) - 1.0).abs() < 1e-12);
        let x = Observable::new(vec![Term::Linear { a: 1.0, b: 0.0, c: 0.0 }]);
        assert!((area_integral(&t, &x) - 0.5).abs() < 1e-14);
        assert!((area_integral_with(&t, &x, AreaRule::default()) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn quadrature_refinement_converges() {
        let t = square_torus();
        let f = trig(vec![[1.0, 0.0, 1.0, 0.5], [2.0, 1.0, 0.3, 0.0], [1.0, 1.0, 0.0, 1.0]]);
        let a = area_integral_with(&t, &f, AreaRule { points: 4, max_diameter: None });
        let b = area_integral_with(&t, &f, AreaRule { points: 8, max_diameter: None });
        assert!((a - b).abs() < 1e-8);
        // mean of a nonconstant trigonometric polynomial on the torus is 0
        assert!(b.abs() < 1e-10);
    }

    #[test]
    fn bump_exact_matches_quadrature() {
        let t = square_torus();
        let spec = ObservableSpec::Bump { cell: 0, center: [0.4, 0.6], sigma: 0.3, amplitude: 2.0 };
        let f = Observable::from_spec(&spec, &t).unwrap();
        let exact = f.exact_integral(&t).unwrap();
        let q = area_integral_with(&t, &f, AreaRule { points: 8, max_diameter: Some(0.02) });
        assert!((exact - q).abs() < 1e-8, "{exact} vs {q}");
    }

    #[test]
    fn sobolev_bounds() {
        let t = square_torus();
        assert!((sobolev_norm(&t, &Observable::constant(1.0)) - 1.0).abs() < 1e-12);
        let f = trig(vec![[1.0, 2.0, 1.0, 0.0]]);
        let s0 = sobolev_norm(&t, &f);
        // ‖cos 2π(x + 2y)‖² = 1/2, gradient adds (2π)²·5/2
        let expect = (0.5 + TAU2 * 5.0 * 0.5).sqrt();
        assert!((s0 - expect).abs() < 1e-8);
        for s in [-1.0, -0.5, 0.5, 1.0] {
            let g = Mat2::teichmuller(s);
            let ts2 = t.apply_linear(&g).unwrap();
            let f2 = f.transported(&g);
            assert!(sobolev_norm(&ts2, &f2) <= s.abs().exp() * s0 * (1.0 + 1e-9));
        }
    }

    const TAU2: f64 = std::f64::consts::TAU * std::f64::consts::TAU;
}
