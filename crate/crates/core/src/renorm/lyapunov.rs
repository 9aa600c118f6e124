use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::iet::{Iet, Permutation};
use super::RenormError;
use crate::flow::{first_return_iet, FlowError, Transversal};
use crate::surface::TranslationSurface;
use crate::tol::Tolerances;

/// Smallest accepted number of Zorich steps.
pub const MIN_STEPS: usize = 1000;

/// Accumulated log-condition growth that forces an early re-orthonormalization.
const MAX_GROWTH: f64 = 18.0;

/// Default per-step cap for long runs. Step counts have a tail of order 1/n,
/// so a generic orbit of 10^6 steps usually contains a count above 10^6.
pub const DEFAULT_ZORICH_CAP: u64 = 1_000_000_000_000;

#[derive(Clone, Debug, Serialize)]
pub struct LyapunovOptions {
    /// Zorich steps used for the estimate (after burn-in).
    pub n_steps: usize,
    /// Number of tracked directions; defaults to the full dimension.
    pub n_vectors: Option<usize>,
    /// Zorich steps between re-orthonormalizations.
    pub reorth_every: usize,
    pub batches: usize,
    /// Discarded Zorich steps; defaults to 1% of `n_steps`.
    pub burn_in: Option<usize>,
    pub seed: u64,
    /// Elementary steps allowed in one Zorich step before NonTerminating.
    pub zorich_cap: u64,
    #[serde(skip)]
    pub tol: Tolerances,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            n_steps: 100_000,
            n_vectors: None,
            reorth_every: 10,
            batches: 20,
            burn_in: None,
            seed: 0,
            zorich_cap: DEFAULT_ZORICH_CAP,
            tol: Tolerances::default(),
        }
    }
}

impl LyapunovOptions {
    pub fn with_steps(n_steps: usize, seed: u64) -> Self {
        Self { n_steps, seed, ..Self::default() }
    }
}

/// Lyapunov exponents of the Zorich cocycle.
#[derive(Clone, Debug, Serialize)]
pub struct LyapunovEstimate {
    /// Exponents divided by the top one, non-increasing.
    pub exponents: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Exponents per Zorich step before normalization.
    pub raw: Vec<f64>,
    pub raw_stderr: Vec<f64>,
    pub steps: usize,
    pub elementary_steps: u64,
    pub seed: u64,
    pub permutation: String,
    pub stratum: String,
    pub genus: usize,
}

impl LyapunovEstimate {
    /// `exponents[1] + 2·stderr[1] < 1`.
    pub fn gap_holds(&self) -> bool {
        match (self.exponents.get(1), self.stderr.get(1)) {
            (Some(l), Some(e)) => l + 2.0 * e < 1.0,
            _ => true,
        }
    }

    /// `(λᵢ + λ_{2g+1-i}, combined stderr)` for `i = 1..=g`, pairing the top
    /// `g` exponents with the bottom `g`. Empty unless the full spectrum was
    /// tracked.
    pub fn symmetry_pairs(&self) -> Vec<(f64, f64)> {
        let n = self.exponents.len();
        if n < 2 * self.genus {
            return Vec::new();
        }
        (0..self.genus)
            .map(|i| {
                let j = n - 1 - i;
                let sum = self.exponents[i] + self.exponents[j];
                let err = (self.stderr[i].powi(2) + self.stderr[j].powi(2)).sqrt();
                (sum, err)
            })
            .collect()
    }
}

/// Modified Gram–Schmidt on the columns of `v` (each a vector of length d);
/// returns the log norms of the successive residuals.
fn orthonormalize(v: &mut [Vec<f64>]) -> Vec<f64> {
    let mut logs = Vec::with_capacity(v.len());
    for i in 0..v.len() {
        let (done, rest) = v.split_at_mut(i);
        let x = &mut rest[0];
        for q in done.iter() {
            let p: f64 = q.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
        }
        let n = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        x.iter_mut().for_each(|a| *a /= n);
        logs.push(n.ln());
    }
    logs
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// Lyapunov exponents of the Zorich cocycle along the induction orbit of an
/// IET, by periodic re-orthonormalization of tracked vectors. When `lengths`
/// is `None` they are drawn from the simplex with `opts.seed`.
pub fn lyapunov_spectrum(
    perm: &Permutation,
    lengths: Option<&[f64]>,
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate, RenormError> {
    if opts.n_steps < MIN_STEPS {
        return Err(RenormError::InsufficientSteps { got: opts.n_steps, min: MIN_STEPS });
    }
    if opts.reorth_every == 0 || opts.batches == 0 {
        return Err(RenormError::InvalidInput("cadence and batch count must be positive".into()));
    }
    let d = perm.len();
    let k = opts.n_vectors.unwrap_or(d);
    if k == 0 || k > d {
        return Err(RenormError::InvalidInput(format!("n_vectors must be in 1..={d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut iet = match lengths {
        Some(l) => Iet::new(perm.clone(), l)?,
        None => Iet::random(perm.clone(), &mut rng)?,
    }
    .with_tolerances(opts.tol);
    iet.normalize()?;

    let mut vecs: Vec<Vec<f64>> = (0..k).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    orthonormalize(&mut vecs);

    let burn_in = opts.burn_in.unwrap_or(opts.n_steps / 100);
    let total = burn_in + opts.n_steps;
    let batch_len = opts.n_steps.div_ceil(opts.batches);
    let mut sums = vec![vec![0.0; k]; opts.batches];
    let mut batch_steps = vec![0usize; opts.batches];
    let mut since = 0;
    let mut growth = 0.0;
    let mut elementary = 0u64;

    for step in 0..total {
        let (_, count) = iet.zorich_in_place(opts.zorich_cap, |w, l, c| {
            // transpose of (I + E_{w,l})^c
            let c = c as f64;
            for v in vecs.iter_mut() {
                v[l] += c * v[w];
            }
        })?;
        iet.normalize()?;
        elementary += count;
        since += 1;
        growth += 2.0 * (1.0 + count as f64).ln();
        let batch = step.checked_sub(burn_in).map(|s| s / batch_len);
        let batch_end =
            step + 1 == burn_in || step + 1 == total || (step >= burn_in && (step - burn_in + 1) % batch_len == 0);
        if since >= opts.reorth_every || growth > MAX_GROWTH || batch_end {
            let logs = orthonormalize(&mut vecs);
            if let Some(b) = batch {
                for (s, l) in sums[b].iter_mut().zip(&logs) {
                    *s += l;
                }
            }
            since = 0;
            growth = 0.0;
        }
        if let Some(b) = batch {
            batch_steps[b] += 1;
        }
    }

    let used: Vec<usize> = (0..opts.batches).filter(|&b| batch_steps[b] > 0).collect();
    let mut raw = Vec::with_capacity(k);
    let mut raw_stderr = Vec::with_capacity(k);
    let mut exponents = Vec::with_capacity(k);
    let mut stderr = Vec::with_capacity(k);
    for i in 0..k {
        let per_step: Vec<f64> = used.iter().map(|&b| sums[b][i] / batch_steps[b] as f64).collect();
        let (m, e) = mean_and_stderr(&per_step);
        raw.push(m);
        raw_stderr.push(e);
        let ratio: Vec<f64> = used.iter().map(|&b| sums[b][i] / sums[b][0]).collect();
        let (m, e) = mean_and_stderr(&ratio);
        exponents.push(m);
        stderr.push(e);
    }
    Ok(LyapunovEstimate {
        exponents,
        stderr,
        raw,
        raw_stderr,
        steps: opts.n_steps,
        elementary_steps: elementary,
        seed: opts.seed,
        permutation: perm.to_string(),
        stratum: perm.stratum().to_string(),
        genus: perm.genus(),
    })
}

/// Exponents of the cocycle along the first-return IET of the flow in
/// direction `θ`, seeded with the extracted lengths.
pub fn direction_exponent(
    ts: &TranslationSurface,
    theta: f64,
    transversal: &Transversal,
    opts: &LyapunovOptions,
) -> Result<LyapunovEstimate, FlowError> {
    let map = first_return_iet(ts, theta, transversal)?;
    let lengths = map.iet.lengths();
    Ok(lyapunov_spectrum(map.iet.permutation(), Some(&lengths), opts)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_spectrum() {
        let p = Permutation::parse("21").unwrap();
        let est = lyapunov_spectrum(&p, None, &LyapunovOptions::with_steps(20_000, 1)).unwrap();
        assert!((est.exponents[0] - 1.0).abs() < 1e-12);
        assert!((est.exponents[1] + 1.0).abs() < 1e-6, "{:?}", est.exponents);
        assert_eq!(est.genus, 1);
    }

    #[test]
    fn too_few_steps() {
        let p = Permutation::parse("21").unwrap();
        let err = lyapunov_spectrum(&p, None, &LyapunovOptions::with_steps(999, 1)).unwrap_err();
        assert!(matches!(err, RenormError::InsufficientSteps { .. }));
    }

    #[test]
    fn genus_two_quick_estimate() {
        let p = Permutation::parse("4321").unwrap();
        let est = lyapunov_spectrum(&p, None, &LyapunovOptions::with_steps(100_000, 7)).unwrap();
        assert!((est.exponents[1] - 1.0 / 3.0).abs() < 0.05, "{:?}", est.exponents);
        assert!(est.gap_holds());
        for (sum, err) in est.symmetry_pairs() {
            assert!(sum.abs() < 3.0 * err + 0.02, "{sum} {err}");
        }
        assert!(est.exponents.windows(2).all(|w| w[0] >= w[1] - 1e-9));
    }

    #[test]
    fn deterministic_for_seed() {
        let p = Permutation::parse("54321").unwrap();
        let o = LyapunovOptions::with_steps(2000, 3);
        let a = lyapunov_spectrum(&p, None, &o).unwrap();
        let b = lyapunov_spectrum(&p, None, &o).unwrap();
        assert_eq!(a.exponents, b.exponents);
    }

    fn octagon_surface() -> TranslationSurface {
        use crate::geometry::{make_polygon_from_angles, unfold};
        use num_rational::Rational64;
        let a = [Rational64::new(1, 8), Rational64::new(3, 8), Rational64::new(1, 2)];
        unfold(&make_polygon_from_angles(&a, 1.0, None).unwrap()).unwrap()
    }

    #[test]
    fn torus_direction_spectrum() {
        use crate::flow::FlowPoint;
        use crate::linalg::Vec2;
        let ts = crate::surface::square_torus();
        let tr = Transversal::from_point(FlowPoint::new(0, Vec2::new(0.3, 0.5)), Vec2::new(1.0, 0.0));
        let est = direction_exponent(&ts, -0.4, &tr, &LyapunovOptions::with_steps(5000, 0)).unwrap();
        assert_eq!(est.exponents.len(), 2);
        assert!((est.exponents[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn octagon_direction_has_gap() {
        use crate::flow::{direction, separatrix_transversal};
        use crate::linalg::Vec2;
        let ts = octagon_surface();
        let theta = 0.4123;
        let u = direction(theta);
        let dir = Vec2::new(u.y, -u.x);
        let corner = ts
            .classes()
            .iter()
            .filter(|c| c.is_singular())
            .flat_map(|c| c.corners.iter().copied())
            .find(|c| {
                let (o, b) = ts.corner_sector(c.0, c.1);
                o.cross(dir) > 1e-9 && dir.cross(b) > 1e-9
            })
            .unwrap();
        let tr = separatrix_transversal(&ts, theta, corner, dir, 3.0 * ts.max_cell_diameter()).unwrap();
        let est = direction_exponent(&ts, theta, &tr, &LyapunovOptions::with_steps(50_000, 0)).unwrap();
        assert_eq!(est.stratum, "H(2)");
        assert!(est.gap_holds());
        assert!((est.exponents[1] - 1.0 / 3.0).abs() < 0.1, "{:?}", est.exponents);
    }
}
