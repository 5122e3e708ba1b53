use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Power-law fit `value ≈ C t^p` on a window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Ordinary least squares `y = a + b x`; returns `(b, stderr(b), a)`.
pub(crate) fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let stderr = if x.len() > 2 {
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    (slope, stderr, intercept)
}

/// Least-squares slope of `log value` against `log t` over the points with
/// `t` inside `window` (inclusive, with a relative `1e-9` slack).
pub fn decay_fit(series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit> {
    let (lo, hi) = window;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi > lo) {
        return Err(Error::arg(format!("invalid fit window {lo}:{hi}")));
    }
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|(t, _)| *t >= lo * (1.0 - 1e-9) && *t <= hi * (1.0 + 1e-9))
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} points in window {lo}:{hi}, at least 5 required",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::arg(format!("nonpositive value {v} at t = {t}")));
    }
    let x: Vec<f64> = pts.iter().map(|(t, _)| t.ln()).collect();
    let y: Vec<f64> = pts.iter().map(|(_, v)| v.ln()).collect();
    let (exponent, stderr, _) = least_squares(&x, &y);
    Ok(DecayFit {
        exponent,
        stderr,
        window,
        n_points: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geometric(f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (0..12).map(|j| 2f64.powf(j as f64 / 2.0)).map(|t| (t, f(t))).collect()
    }

    #[test]
    fn exact_power_law() {
        let fit = decay_fit(&geometric(|t| 3.0 / t.sqrt()), (4.0, 64.0)).unwrap();
        assert!((fit.exponent + 0.5).abs() <= 1e-10);
        assert!(fit.stderr <= 1e-10);
        assert_eq!(fit.n_points, 8);
    }

    #[test]
    fn constant_series() {
        let fit = decay_fit(&geometric(|_| 0.7), (1.0, 100.0)).unwrap();
        assert!(fit.exponent.abs() <= 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(decay_fit(&geometric(|t| t), (100.0, 200.0)).is_err());
        assert!(decay_fit(&geometric(|t| 1.0 - t), (1.0, 100.0)).is_err());
        assert!(decay_fit(&geometric(|t| t), (4.0, 2.0)).is_err());
    }

    #[test]
    fn stderr_reflects_noise() {
        let noisy = geometric(|t| t.powf(-1.0) * if (t.log2() * 2.0) as i64 % 2 == 0 { 1.1 } else { 0.9 });
        let fit = decay_fit(&noisy, (1.0, 64.0)).unwrap();
        assert!((fit.exponent + 1.0).abs() < 0.1);
        assert!(fit.stderr > 1e-3);
    }
}
