//! Summary statistics and log-log exponent fits.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// OLS fit of `log regret = intercept + slope · log T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points_used: usize,
    /// Points with nonpositive regret, which have no logarithm.
    pub dropped_nonpositive: usize,
}

pub fn fit_regret_exponent(points: &[(f64, f64)]) -> Result<ExponentFit> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, r)| *t > 0.0 && *r > 0.0 && t.is_finite() && r.is_finite())
        .map(|(t, r)| (t.ln(), r.ln()))
        .collect();
    let dropped = points.len() - usable.len();
    if usable.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "exponent fit needs at least 3 positive points, got {} ({dropped} dropped)",
            usable.len()
        )));
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = usable.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = usable.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = usable.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InvalidArgument(
            "exponent fit needs at least two distinct horizons".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = usable
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    if dropped > 0 {
        log::warn!("exponent fit dropped {dropped} nonpositive point(s)");
    }
    Ok(ExponentFit {
        slope,
        intercept,
        r_squared,
        points_used: usable.len(),
        dropped_nonpositive: dropped,
    })
}

/// Linearly interpolated quantile of unsorted data; `None` when empty.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

pub fn median(values: &[f64]) -> Option<f64> {
    quantile(values, 0.5)
}

/// Sample mean and its standard error.
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;

    #[test]
    fn exact_power_laws() {
        let pts: Vec<(f64, f64)> = [100.0f64, 400.0, 1600.0]
            .iter()
            .map(|&t| (t, t.sqrt()))
            .collect();
        let f = fit_regret_exponent(&pts).unwrap();
        assert!((f.slope - 0.5).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = (10..17)
            .map(|e| 2f64.powi(e))
            .map(|t| (t, 3.0 * t))
            .collect();
        let f = fit_regret_exponent(&pts).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn noisy_square_root() {
        let mut rng = SimRng::new(12);
        for _ in 0..100 {
            let pts: Vec<(f64, f64)> = (4..=20)
                .map(|e| 2f64.powi(e))
                .map(|t| (t, t.sqrt() * (1.0 + 0.1 * rng.normal())))
                .collect();
            let s = fit_regret_exponent(&pts).unwrap().slope;
            assert!((0.45..=0.55).contains(&s), "{s}");
        }
    }

    #[test]
    fn drops_nonpositive_and_needs_three_points() {
        let pts = [(1.0, 1.0), (2.0, -1.0), (4.0, 2.0), (8.0, 0.0), (16.0, 4.0)];
        let f = fit_regret_exponent(&pts).unwrap();
        assert_eq!((f.points_used, f.dropped_nonpositive), (3, 2));
        assert!(fit_regret_exponent(&pts[..3]).is_err());
    }

    #[test]
    fn quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&v), Some(2.5));
        assert_eq!(quantile(&v, 0.0), Some(1.0));
        assert_eq!(quantile(&v, 1.0), Some(4.0));
        assert_eq!(median(&[]), None);
        let (m, se) = mean_and_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - 1.0).abs() < 1e-15);
    }
}
