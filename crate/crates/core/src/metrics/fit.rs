use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lower bound on `T` for rate fits.
pub const DEFAULT_BURN_IN: f64 = 50.0;

/// Least-squares line `y = intercept + exponent · x` with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub r_squared: f64,
    pub points_used: usize,
}

fn line_fit(points: &[(f64, f64)]) -> RateFit {
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let stderr = if points.len() > 2 { (ssr / (m - 2.0) / sxx).sqrt() } else { f64::NAN };
    let r_squared = if syy > 0.0 { (1.0 - ssr / syy).clamp(0.0, 1.0) } else { 1.0 };
    RateFit { exponent: slope, intercept, stderr, r_squared, points_used: points.len() }
}

fn usable(curve: &[(f64, f64)], burn_in: f64) -> Result<Vec<(f64, f64)>> {
    let kept: Vec<(f64, f64)> = curve.iter().copied().filter(|&(t, _)| t >= burn_in).collect();
    if let Some(&(t, value)) = kept.iter().find(|&&(_, v)| !(v > 0.0 && v.is_finite())) {
        return Err(Error::NonPositiveValue { t, value });
    }
    let mut distinct: Vec<f64> = kept.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InsufficientPoints(distinct.len()));
    }
    Ok(kept)
}

/// Slope of `ln value` against `ln T` over points with `T ≥ burn_in`.
pub fn fit_decay_exponent(curve: &[(f64, f64)], burn_in: f64) -> Result<RateFit> {
    let kept = usable(curve, burn_in)?;
    let logs: Vec<(f64, f64)> = kept.iter().map(|&(t, v)| (t.ln(), v.ln())).collect();
    Ok(line_fit(&logs))
}

/// Slope of `ln value` against `T`, for exponentially changing curves.
pub fn fit_exponential_rate(curve: &[(f64, f64)], burn_in: f64) -> Result<RateFit> {
    let kept = usable(curve, burn_in)?;
    let logs: Vec<(f64, f64)> = kept.iter().map(|&(t, v)| (t, v.ln())).collect();
    Ok(line_fit(&logs))
}

/// CSV with columns `T,value,ln_T,ln_value`.
pub fn curve_to_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("T,value,ln_T,ln_value\n");
    for &(t, v) in curve {
        let _ = writeln!(out, "{t},{v:e},{:e},{:e}", t.ln(), v.ln());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> Vec<f64> {
        (0..=20).map(|k| 10f64 * 100f64.powf(k as f64 / 20.0)).collect()
    }

    #[test]
    fn exact_power_laws() {
        let curve: Vec<_> = grid().into_iter().map(|t| (t, 1.0 / t)).collect();
        let fit = fit_decay_exponent(&curve, 10.0).unwrap();
        assert!((fit.exponent + 1.0).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.points_used, 21);

        let curve: Vec<_> = grid().into_iter().map(|t| (t, 5.0 / t.sqrt())).collect();
        let fit = fit_decay_exponent(&curve, 10.0).unwrap();
        assert!((fit.exponent + 0.5).abs() < 1e-9);
        assert!((fit.intercept - 5f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn burn_in_and_errors() {
        let curve = vec![(10.0, 1.0), (20.0, 0.5), (100.0, 0.1), (200.0, 0.05)];
        assert_eq!(fit_decay_exponent(&curve, 50.0), Err(Error::InsufficientPoints(2)));
        assert_eq!(fit_decay_exponent(&curve, 10.0).unwrap().points_used, 4);
        let bad = vec![(60.0, 1.0), (70.0, 0.0), (80.0, 0.5)];
        assert_eq!(fit_decay_exponent(&bad, 50.0), Err(Error::NonPositiveValue { t: 70.0, value: 0.0 }));
        let repeated = vec![(60.0, 1.0), (60.0, 0.9), (80.0, 0.5)];
        assert_eq!(fit_decay_exponent(&repeated, 50.0), Err(Error::InsufficientPoints(2)));
    }

    #[test]
    fn exponential_fit_recovers_log_rate() {
        let curve: Vec<_> = (1..=40).map(|t| (t as f64, 3.0 * 1.2f64.powi(t))).collect();
        let fit = fit_exponential_rate(&curve, 1.0).unwrap();
        assert!((fit.exponent - 1.2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn csv_has_header_and_logs() {
        let csv = curve_to_csv(&[(100.0, 0.01)]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("T,value,ln_T,ln_value"));
        let cells: Vec<f64> = lines.next().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cells[2] - 100f64.ln()).abs() < 1e-12 && (cells[3] - 0.01f64.ln()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn slope_ignores_constants(c in 1e-6f64..1e6, slope in -3.0f64..3.0) {
            let curve: Vec<_> = grid().into_iter().map(|t| (t, c * t.powf(slope))).collect();
            let fit = fit_decay_exponent(&curve, 0.0).unwrap();
            prop_assert!((fit.exponent - slope).abs() < 1e-9);
            prop_assert!(fit.r_squared >= 0.0 && fit.r_squared <= 1.0);
        }

        #[test]
        fn r_squared_in_unit_interval(noise in proptest::collection::vec(-1.0f64..1.0, 21)) {
            let curve: Vec<_> = grid().into_iter().zip(noise).map(|(t, e)| (t, (e - t.ln()).exp())).collect();
            let fit = fit_decay_exponent(&curve, 0.0).unwrap();
            prop_assert!(fit.r_squared >= 0.0 && fit.r_squared <= 1.0);
            prop_assert!(fit.stderr >= 0.0);
        }
    }
}
