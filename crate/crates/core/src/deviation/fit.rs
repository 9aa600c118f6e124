use serde::{Deserialize, Serialize};

use super::series::{DeviationSeries, PointFlag};
use super::DeviationError;

/// Minimum number of usable points in a fit window.
pub const MIN_FIT_POINTS: usize = 5;

/// Which points of a series enter the fit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum WindowPolicy {
    /// Drop this leading fraction of the points.
    DiscardFraction { fraction: f64 },
    /// Keep points with `t_min ≤ T ≤ t_max`.
    TimeRange { t_min: f64, t_max: f64 },
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy::DiscardFraction { fraction: 0.3 }
    }
}

/// Least-squares line through `(log T, log D)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// First and last series index in the window.
    pub window: [usize; 2],
    pub n_points: usize,
    /// Points in the window dropped because `D` was zero or not finite.
    pub dropped: usize,
}

/// Fits `log D = slope·log T + intercept` over the window. Points flagged
/// as zero are dropped.
pub fn fit_exponent(series: &DeviationSeries, policy: &WindowPolicy) -> Result<ExponentFit, DeviationError> {
    let values: Vec<f64> = series
        .values
        .iter()
        .zip(&series.flags)
        .map(|(&d, &f)| if f == PointFlag::Zero { 0.0 } else { d })
        .collect();
    fit_points(&series.times, &values, policy)
}

pub(crate) fn fit_points(times: &[f64], values: &[f64], policy: &WindowPolicy) -> Result<ExponentFit, DeviationError> {
    let n = times.len().min(values.len());
    let idx: Vec<usize> = match *policy {
        WindowPolicy::DiscardFraction { fraction } => {
            let skip = (fraction.clamp(0.0, 1.0) * n as f64).floor() as usize;
            (skip..n).collect()
        }
        WindowPolicy::TimeRange { t_min, t_max } => (0..n).filter(|&j| times[j] >= t_min && times[j] <= t_max).collect(),
    };
    let usable: Vec<usize> =
        idx.iter().copied().filter(|&j| values[j] > 0.0 && values[j].is_finite() && times[j] > 0.0).collect();
    let dropped = idx.len() - usable.len();
    if usable.len() < MIN_FIT_POINTS {
        return Err(DeviationError::DegenerateWindow { got: usable.len(), min: MIN_FIT_POINTS });
    }
    let xs: Vec<f64> = usable.iter().map(|&j| times[j].ln()).collect();
    let ys: Vec<f64> = usable.iter().map(|&j| values[j].ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(DeviationError::DegenerateWindow { got: 1, min: MIN_FIT_POINTS });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(ExponentFit {
        slope,
        intercept,
        r2,
        window: [idx[0], *idx.last().unwrap()],
        n_points: usable.len(),
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|j| 10.0 * 1.25f64.powi(j as i32)).collect()
    }

    #[test]
    fn pure_power_law() {
        let t = grid(40);
        let d: Vec<f64> = t.iter().map(|t| t.powf(0.4)).collect();
        let f = fit_points(&t, &d, &WindowPolicy::default()).unwrap();
        assert!((f.slope - 0.4).abs() < 1e-12);
        assert!(f.intercept.abs() < 1e-10);
        assert_eq!(f.window, [12, 39]);
    }

    #[test]
    fn perturbed_power_law() {
        let t = grid(60);
        let d: Vec<f64> = t.iter().map(|t| 3.0 * t.powf(0.4) * (1.0 + 0.01 * t.ln().sin())).collect();
        let f = fit_points(&t, &d, &WindowPolicy::default()).unwrap();
        assert!((f.slope - 0.4).abs() < 0.01);
    }

    #[test]
    fn constant_series() {
        let t = grid(20);
        let f = fit_points(&t, &vec![2.5; 20], &WindowPolicy::default()).unwrap();
        assert!(f.slope.abs() < 1e-12);
    }

    #[test]
    fn zeros_are_dropped() {
        let t = grid(20);
        let mut d = vec![1.0; 20];
        d[15] = 0.0;
        let f = fit_points(&t, &d, &WindowPolicy::default()).unwrap();
        assert_eq!(f.dropped, 1);
        let short = fit_points(&t[..5], &d[..5], &WindowPolicy::default());
        assert!(matches!(short, Err(DeviationError::DegenerateWindow { .. })));
    }

    #[test]
    fn time_range_window() {
        let t = grid(30);
        let d: Vec<f64> = t.iter().map(|t| t.sqrt()).collect();
        let f = fit_points(&t, &d, &WindowPolicy::TimeRange { t_min: 100.0, t_max: 1000.0 }).unwrap();
        assert!(t[f.window[0]] >= 100.0 && t[f.window[1]] <= 1000.0);
        assert!((f.slope - 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn scale_invariance(
            vals in prop::collection::vec(0.01f64..100.0, 10..40),
            c in 0.001f64..1000.0,
        ) {
            let t = grid(vals.len());
            let scaled: Vec<f64> = vals.iter().map(|v| c * v).collect();
            let a = fit_points(&t, &vals, &WindowPolicy::default()).unwrap();
            let b = fit_points(&t, &scaled, &WindowPolicy::default()).unwrap();
            prop_assert!((a.slope - b.slope).abs() < 1e-9);
            prop_assert!((b.intercept - a.intercept - c.ln()).abs() < 1e-9);
        }
    }
}
