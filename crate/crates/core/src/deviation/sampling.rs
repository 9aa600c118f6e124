use serde::{Deserialize, Serialize};

use super::DeviationError;
use crate::linalg::Mat2;
use crate::surface::{systole, TeichmullerOrbit, TranslationSurface};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    /// Systole floor of the deeper compact set, used for re-entry.
    pub deep_systole: f64,
    /// Systole floor every emitted time must satisfy.
    pub systole_floor: f64,
    /// Minimum spacing between emitted times.
    pub step: f64,
    /// Width of the neighborhood of directions checked at each candidate.
    pub d_proxy: f64,
    /// Scan step while waiting for re-entry.
    pub dt: f64,
    /// Directions sampled in the neighborhood besides the central one.
    #[serde(default = "default_neighbors")]
    pub neighbors: usize,
    /// Directions `φ` are checked when `|φ - θ|·e^{rate·t} ≤ d_proxy`.
    #[serde(default = "default_rate")]
    pub rate: f64,
}

fn default_neighbors() -> usize {
    8
}

fn default_rate() -> f64 {
    2.0
}

impl SamplingParams {
    pub fn new(deep_systole: f64, systole_floor: f64, step: f64) -> Self {
        Self {
            deep_systole,
            systole_floor,
            step,
            d_proxy: 0.1,
            dt: step / 10.0,
            neighbors: default_neighbors(),
            rate: default_rate(),
        }
    }
}

/// Increasing times along the Teichmüller orbit at which the surface lies
/// in a fixed compact part of the stratum.
#[derive(Clone, Debug, Serialize)]
pub struct SamplingSchedule {
    pub times: Vec<f64>,
    /// Systole of `g_s r_θ S` at each emitted time.
    pub systoles: Vec<f64>,
    pub params: SamplingParams,
    pub theta: f64,
    pub horizon: f64,
    /// No re-entry into the deeper compact set happened before the horizon.
    pub horizon_exhausted: bool,
}

/// `g_t r_φ S = (g_t r_{φ-θ} g_{-t})·g_t r_θ S`; the conjugated rotation is
/// a bounded shear once `|φ - θ|·e^{2t}` is bounded.
fn neighbor_map(t: f64, delta: f64) -> Mat2 {
    let (s, c) = delta.sin_cos();
    Mat2::new(c, (2.0 * t).exp() * s, -(-2.0 * t).exp() * s, c)
}

/// Sampling schedule along the orbit of direction `θ` up to `horizon`.
///
/// From the last emitted time `s_n`, the candidate `s_n + step` is accepted
/// when every sampled nearby direction has systole at least
/// `systole_floor`; otherwise the schedule waits for the first time after the
/// candidate at which the systole reaches `deep_systole`.
pub fn sampling_times(
    ts: &TranslationSurface,
    theta: f64,
    horizon: f64,
    params: &SamplingParams,
) -> Result<SamplingSchedule, DeviationError> {
    let p = params;
    if !(p.deep_systole > p.systole_floor && p.systole_floor > 0.0) {
        return Err(DeviationError::InvalidInput("need deep_systole > systole_floor > 0".into()));
    }
    if !(p.step > 0.0 && p.dt > 0.0 && p.d_proxy >= 0.0 && horizon > 0.0) {
        return Err(DeviationError::InvalidInput("step, dt and horizon must be positive".into()));
    }
    let mut orbit = TeichmullerOrbit::new(ts, theta)?;
    let mut sys_at = |t: f64| -> Result<(f64, TranslationSurface), DeviationError> {
        orbit.advance_to(t)?;
        let s = orbit.surface()?;
        Ok((systole(&s)?, s))
    };
    let (s0, _) = sys_at(0.0)?;
    let mut times = vec![0.0];
    let mut systoles = vec![s0];
    let mut exhausted = false;
    let mut cur = 0.0;
    'outer: loop {
        let t = cur + p.step;
        if t > horizon {
            break;
        }
        let (s, surf) = sys_at(t)?;
        if s >= p.systole_floor {
            let width = p.d_proxy * (-p.rate * t).exp();
            let mut ok = true;
            for k in 0..p.neighbors {
                let frac = if p.neighbors == 1 { 0.0 } else { -1.0 + 2.0 * k as f64 / (p.neighbors - 1) as f64 };
                let near = surf.apply_linear(&neighbor_map(t, frac * width))?;
                if systole(&near)? < p.systole_floor {
                    ok = false;
                    break;
                }
            }
            if ok {
                times.push(t);
                systoles.push(s);
                cur = t;
                continue;
            }
        }
        let mut k = 0usize;
        loop {
            let t2 = t + k as f64 * p.dt;
            if t2 > horizon {
                exhausted = true;
                break 'outer;
            }
            let (s2, _) = sys_at(t2)?;
            if s2 >= p.deep_systole {
                times.push(t2);
                systoles.push(s2);
                cur = t2;
                break;
            }
            k += 1;
        }
    }
    Ok(SamplingSchedule { times, systoles, params: p.clone(), theta, horizon, horizon_exhausted: exhausted })
}

/// Spacing condition `0 < s_{n+1} - s_n ≤ ε·s_n` for one `ε`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapCondition {
    pub eps: f64,
    /// Least `n` from which the condition holds through the end of the
    /// schedule; `None` if it fails at the last gap.
    pub holds_from: Option<usize>,
    /// Indices `n` at which it fails.
    pub failures: Vec<usize>,
}

/// Empirical `K_λ = max_n Σ_{k≤n} e^{λ s_k} / e^{λ s_n}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SumBound {
    pub lambda: f64,
    pub k: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SamplingReport {
    pub gaps: Vec<GapCondition>,
    pub sums: Vec<SumBound>,
}

/// Checks the spacing and exponential-sum conditions on a schedule.
pub fn verify_sampling_conditions(times: &[f64], eps_list: &[f64], lambda_list: &[f64]) -> SamplingReport {
    let gaps = eps_list
        .iter()
        .map(|&eps| {
            let failures: Vec<usize> = (0..times.len().saturating_sub(1))
                .filter(|&n| {
                    let g = times[n + 1] - times[n];
                    !(g > 0.0 && g <= eps * times[n])
                })
                .collect();
            let last = times.len().saturating_sub(2);
            let holds_from = match failures.last() {
                None => Some(0),
                Some(&f) if f < last => Some(f + 1),
                _ => None,
            };
            GapCondition { eps, holds_from, failures }
        })
        .collect();
    let sums = lambda_list
        .iter()
        .map(|&lambda| {
            let mut ratio: f64 = 0.0;
            let mut k: f64 = 0.0;
            for n in 1..times.len() {
                let decay = if n > 1 { (lambda * (times[n - 1] - times[n])).exp() } else { 0.0 };
                ratio = ratio * decay + 1.0;
                k = k.max(ratio);
            }
            SumBound { lambda, k }
        })
        .collect();
    SamplingReport { gaps, sums }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::square_torus;
    use proptest::prelude::*;

    fn golden_theta() -> f64 {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        -(1.0 / phi).atan()
    }

    #[test]
    fn bounded_orbit_gives_arithmetic_schedule() {
        let ts = square_torus();
        let mut p = SamplingParams::new(0.3, 0.2, 0.5);
        p.d_proxy = 0.05;
        let s = sampling_times(&ts, golden_theta(), 10.0, &p).unwrap();
        assert!(!s.horizon_exhausted);
        assert_eq!(s.times.len(), 21);
        for (n, t) in s.times.iter().enumerate() {
            assert!((t - 0.5 * n as f64).abs() < 1e-12);
        }
        assert!(s.systoles.iter().all(|&x| x >= 0.2));
    }

    #[test]
    fn unreachable_floor_exhausts_horizon() {
        let ts = square_torus();
        let s = sampling_times(&ts, golden_theta(), 5.0, &SamplingParams::new(3.0, 2.0, 0.5)).unwrap();
        assert_eq!(s.times, vec![0.0]);
        assert!(s.horizon_exhausted);
    }

    #[test]
    fn gaps_respect_the_step() {
        let ts = square_torus();
        let s = sampling_times(&ts, 0.3, 6.0, &SamplingParams::new(0.9, 0.6, 0.4)).unwrap();
        for w in s.times.windows(2) {
            assert!(w[1] - w[0] >= 0.4 - 1e-12);
        }
        for (i, &x) in s.systoles.iter().enumerate().skip(1) {
            assert!(x >= 0.6, "time {} systole {x}", s.times[i]);
        }
    }

    #[test]
    fn arithmetic_schedule_report() {
        let step = 0.5;
        let times: Vec<f64> = (0..200).map(|n| n as f64 * step).collect();
        let r = verify_sampling_conditions(&times, &[0.1, 0.25], &[0.5, 1.0]);
        assert_eq!(r.gaps[0].holds_from, Some(10));
        assert_eq!(r.gaps[1].holds_from, Some(4));
        for b in &r.sums {
            let bound = 1.0 / (1.0 - (-b.lambda * step).exp());
            assert!(b.k <= bound + 1e-12);
            assert!(b.k > bound - 1e-6);
        }
    }

    #[test]
    fn single_doubling_gap() {
        let mut times: Vec<f64> = (0..30).map(|n| n as f64).collect();
        // s_{11} = 2·s_{10}, then unit steps again
        for t in times.iter_mut().skip(11) {
            *t += 9.0;
        }
        let r = verify_sampling_conditions(&times, &[0.5], &[]);
        assert!(r.gaps[0].failures.contains(&10));
        assert!(!r.gaps[0].failures.iter().any(|&n| n > 10));
        assert_eq!(r.gaps[0].holds_from, Some(11));
    }

    proptest! {
        #[test]
        fn sum_bound_nonincreasing_in_lambda(
            gaps in prop::collection::vec(0.01f64..3.0, 3..40),
            l1 in 0.01f64..5.0,
            dl in 0.0f64..5.0,
        ) {
            let mut times = vec![0.0];
            for g in gaps {
                let last = *times.last().unwrap();
                times.push(last + g);
            }
            let r = verify_sampling_conditions(&times, &[], &[l1, l1 + dl]);
            prop_assert!(r.sums[1].k <= r.sums[0].k + 1e-12);
        }
    }
}
