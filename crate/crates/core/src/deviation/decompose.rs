use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use super::DeviationError;

/// Splitting of `[0, T)` into consecutive segments of lengths taken from a
/// nondecreasing sequence, longest first, plus a remainder shorter than the
/// first length.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition<N> {
    /// Largest (1-based) index with `T_k ≤ T`; zero when `T < T_1`.
    pub n: usize,
    /// Segment counts `m_1..m_n`.
    pub m: Vec<u64>,
    /// Start times of the segments of each length, per index.
    pub starts: Vec<Vec<N>>,
    /// End of the last full segment.
    #[serde(rename = "Ty")]
    pub t_y: N,
    pub tau: N,
}

fn validate<N: PartialOrd + Zero>(t: &N, seq: &[N], as_f64: impl Fn(&N) -> f64) -> Result<(), DeviationError> {
    if seq.is_empty() {
        return Err(DeviationError::EmptySequence);
    }
    if !(*t > N::zero()) {
        return Err(DeviationError::NonPositiveT(as_f64(t)));
    }
    if !(seq[0] > N::zero()) {
        return Err(DeviationError::InvalidInput("first sequence element must be positive".into()));
    }
    if seq.windows(2).any(|w| w[1] < w[0]) {
        return Err(DeviationError::InvalidInput("sequence must be nondecreasing".into()));
    }
    Ok(())
}

/// Exact decomposition: repeatedly take the largest index whose length fits
/// in what remains and use as many consecutive copies of it as fit.
pub fn decompose_exact(t: &BigRational, seq: &[BigRational]) -> Result<Decomposition<BigRational>, DeviationError> {
    validate(t, seq, |x| x.to_f64().unwrap_or(f64::NAN))?;
    // largest 1-based index k with seq[k-1] <= s
    let largest_fitting = |s: &BigRational| seq.partition_point(|x| x <= s);
    let n = largest_fitting(t);
    let mut m = vec![0u64; n];
    let mut starts = vec![Vec::new(); n];
    let mut pos = BigRational::zero();
    let mut rest = t.clone();
    let mut k = n;
    while k > 0 {
        let len = &seq[k - 1];
        let q: BigInt = (&rest / len).floor().to_integer();
        let count = q
            .to_u64()
            .ok_or_else(|| DeviationError::InvalidInput("segment count does not fit in 64 bits".into()))?;
        for _ in 0..count {
            starts[k - 1].push(pos.clone());
            pos += len;
        }
        m[k - 1] = count;
        rest -= len * BigRational::from_integer(q);
        // entries between the next fitting index and k stay zero
        k = largest_fitting(&rest).min(k - 1);
    }
    Ok(Decomposition { n, m, starts, t_y: pos, tau: rest })
}

/// Decomposition of floating-point data, computed exactly on the rational
/// values of the inputs and audited on the way back.
pub fn decompose(t: f64, seq: &[f64]) -> Result<Decomposition<f64>, DeviationError> {
    validate(&t, seq, |x| *x)?;
    let to_q = |x: f64| {
        BigRational::from_float(x).ok_or_else(|| DeviationError::InvalidInput(format!("{x} is not finite")))
    };
    let tq = to_q(t)?;
    let sq = seq.iter().map(|&x| to_q(x)).collect::<Result<Vec<_>, _>>()?;
    let d = decompose_exact(&tq, &sq)?;
    let f = |x: &BigRational| x.to_f64().unwrap_or(f64::NAN);
    let out = Decomposition {
        n: d.n,
        m: d.m.clone(),
        starts: d.starts.iter().map(|v| v.iter().map(f).collect()).collect(),
        t_y: f(&d.t_y),
        tau: f(&d.tau),
    };
    let rebuilt: f64 = out.m.iter().zip(seq).map(|(&m, &l)| m as f64 * l).sum::<f64>() + out.tau;
    let error = (rebuilt - t).abs();
    if error > 1e-9 * t {
        return Err(DeviationError::Inexact { error });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(x: i64) -> BigRational {
        BigRational::from_integer(x.into())
    }

    #[test]
    fn below_first_length() {
        let d = decompose(1.5, &[2.0, 4.0]).unwrap();
        assert_eq!(d.n, 0);
        assert!(d.m.is_empty());
        assert_eq!(d.tau, 1.5);
        assert_eq!(d.t_y, 0.0);
    }

    #[test]
    fn exactly_first_length() {
        let d = decompose(2.0, &[2.0, 4.0]).unwrap();
        assert_eq!((d.n, d.m.clone(), d.tau), (1, vec![1], 0.0));
    }

    #[test]
    fn doubling_sequence_example() {
        let d = decompose(11.0, &[2.0, 4.0, 8.0, 16.0]).unwrap();
        assert_eq!(d.n, 3);
        assert_eq!(d.m, vec![1, 0, 1]);
        assert_eq!(d.starts, vec![vec![8.0], vec![], vec![0.0]]);
        assert_eq!(d.t_y, 10.0);
        assert_eq!(d.tau, 1.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(decompose(1.0, &[]), Err(DeviationError::EmptySequence)));
        assert!(matches!(decompose(0.0, &[1.0]), Err(DeviationError::NonPositiveT(_))));
        assert!(decompose(1.0, &[2.0, 1.0]).is_err());
    }

    /// Independent oracle: greedy packing over integers from the top index.
    fn greedy(t: i64, seq: &[i64]) -> (Vec<i64>, i64) {
        let n = seq.iter().filter(|&&x| x <= t).count();
        let mut rest = t;
        let mut m = vec![0; n];
        for k in (0..n).rev() {
            m[k] = rest / seq[k];
            rest %= seq[k];
        }
        (m, rest)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn lemma_invariants_hold_exactly(
            t in 1i64..100_000,
            mut seq in prop::collection::vec(1i64..5_000, 1..12),
        ) {
            seq.sort_unstable();
            let tq = q(t);
            let sq: Vec<BigRational> = seq.iter().map(|&x| q(x)).collect();
            let d = decompose_exact(&tq, &sq).unwrap();
            let (m, rest) = greedy(t, &seq);
            prop_assert_eq!(d.m.iter().map(|&x| x as i64).collect::<Vec<_>>(), m);
            prop_assert_eq!(d.tau.clone(), q(rest));
            // exact cover
            let mut sum = d.tau.clone();
            for (k, &mk) in d.m.iter().enumerate() {
                sum += &sq[k] * q(mk as i64);
            }
            prop_assert_eq!(sum, tq.clone());
            // counts bounded by consecutive ratios, remainder below the first length
            for k in 0..d.m.len() {
                if k + 1 < sq.len() {
                    prop_assert!(q(d.m[k] as i64) < &sq[k + 1] / &sq[k]);
                }
            }
            prop_assert!(d.tau < sq[0]);
            // segments tile [0, T_y) consecutively, longest first
            let mut segs: Vec<(BigRational, BigRational)> = Vec::new();
            for (k, st) in d.starts.iter().enumerate() {
                for s in st {
                    segs.push((s.clone(), &sq[k] + s));
                }
            }
            segs.sort();
            let mut pos = q(0);
            for (a, b) in segs {
                prop_assert_eq!(a, pos.clone());
                pos = b;
            }
            prop_assert_eq!(pos, d.t_y);
        }

        #[test]
        fn exponential_sequence_counts(
            gaps in prop::collection::vec(0.05f64..3.0, 1..15),
            frac in 0.01f64..1.0,
        ) {
            let mut s = vec![0.5];
            for g in &gaps {
                let last = *s.last().unwrap();
                s.push(last + g);
            }
            let seq: Vec<f64> = s.iter().map(|x| x.exp()).collect();
            let t = seq[0] + frac * (seq.last().unwrap() - seq[0]);
            let d = decompose(t, &seq).unwrap();
            for k in 0..d.m.len() {
                if k + 1 < s.len() {
                    prop_assert!(d.m[k] as f64 <= (s[k + 1] - s[k]).exp() * (1.0 + 1e-12));
                }
            }
        }
    }
}
