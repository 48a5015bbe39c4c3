//! Small statistics helpers shared by the estimators.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanStderr {
    pub mean: f64,
    /// Unbiased sample variance.
    pub variance: f64,
    pub stderr: f64,
    pub count: usize,
}

/// Sample mean, unbiased variance and standard error, summed in slice order.
pub fn mean_stderr(values: &[f64]) -> MeanStderr {
    let count = values.len();
    if count == 0 {
        return MeanStderr {
            mean: f64::NAN,
            variance: f64::NAN,
            stderr: f64::NAN,
            count,
        };
    }
    let mean = values.iter().sum::<f64>() / count as f64;
    let variance = if count > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64
    } else {
        0.0
    };
    MeanStderr {
        mean,
        variance,
        stderr: (variance / count as f64).sqrt(),
        count,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Root-mean-square residual (weighted when weights were given).
    pub residual_rms: f64,
    pub points: usize,
    pub x_lo: f64,
    pub x_hi: f64,
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    let weights = vec![1.0; xs.len()];
    weighted_linear_fit(xs, ys, &weights)
}

/// Weighted least squares with weights proportional to inverse variances.
///
/// The slope standard error uses the residual scale, so the weights only
/// need to be correct up to a common factor.
pub fn weighted_linear_fit(xs: &[f64], ys: &[f64], weights: &[f64]) -> Result<LinearFit> {
    let m = xs.len();
    if m != ys.len() || m != weights.len() {
        return Err(Error::Regression("length mismatch".into()));
    }
    if m < 2 {
        return Err(Error::Regression(format!("{m} points, need at least 2")));
    }
    let sw: f64 = weights.iter().sum();
    if !(sw > 0.0) || weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::Regression("weights must be finite and nonnegative".into()));
    }
    let xbar = xs.iter().zip(weights).map(|(x, w)| w * x).sum::<f64>() / sw;
    let ybar = ys.iter().zip(weights).map(|(y, w)| w * y).sum::<f64>() / sw;
    let sxx: f64 = xs.iter().zip(weights).map(|(x, w)| w * (x - xbar).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Regression("degenerate abscissae".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .zip(weights)
        .map(|((x, y), w)| w * (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ssr: f64 = xs
        .iter()
        .zip(ys)
        .zip(weights)
        .map(|((x, y), w)| w * (y - intercept - slope * x).powi(2))
        .sum();
    let slope_stderr = if m > 2 {
        (ssr / (m - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    let x_lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(LinearFit {
        slope,
        intercept,
        slope_stderr,
        residual_rms: (ssr / sw).sqrt(),
        points: m,
        x_lo,
        x_hi,
    })
}

/// Log-log regression over the points whose abscissa lies in `[lo, hi]`.
/// Nonpositive ordinates are skipped.
pub fn log_log_fit(points: &[(f64, f64)], lo: f64, hi: f64) -> Result<LinearFit> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(x, y)| *x >= lo && *x <= hi && *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .unzip();
    if xs.len() < 4 {
        return Err(Error::Regression(format!(
            "{} usable points in window [{lo}, {hi}], need at least 4",
            xs.len()
        )));
    }
    linear_fit(&xs, &ys)
}

/// Two-sided Student-t quantile `t_{1-alpha/2, dof}`.
pub fn t_quantile(confidence: f64, dof: usize) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, dof.max(1) as f64).expect("valid t distribution");
    dist.inverse_cdf(0.5 + confidence / 2.0)
}

/// Wilson score interval for a binomial proportion at `z` standard deviations.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Log of a sum of exponentials, `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(values: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.into_iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line_is_recovered() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.5 + 2.0 * x).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 0.5).abs() < 1e-12);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn degenerate_fit_is_an_error() {
        assert!(linear_fit(&[1.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(log_log_fit(&[(1.0, 1.0), (2.0, 2.0)], 0.0, 10.0).is_err());
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100, 1.96);
        assert!(lo < 0.3 && 0.3 < hi);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn log_sum_exp_is_stable() {
        let v = log_sum_exp([1000.0, 1000.0]);
        assert!((v - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(std::iter::empty::<f64>()), f64::NEG_INFINITY);
    }

    #[test]
    fn mean_stderr_matches_hand_computation() {
        let s = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-12);
        assert!((s.stderr - (5.0f64 / 12.0).sqrt()).abs() < 1e-12);
    }
}
