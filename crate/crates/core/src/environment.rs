//! I.i.d. time-space disorder `omega(n, x)` addressed by key, with the
//! log-moment generating functions of the supported laws.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};
use crate::graph::VertexId;
use crate::rng::{keyed, open_unit, stream_key};
use crate::stats::log_sum_exp;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum DisorderFamily {
    /// Standard normal.
    Gaussian,
    /// Uniform on `{-1, +1}`.
    Rademacher,
    /// Finite law with the given atoms and probabilities.
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub family: DisorderFamily,
    pub seed: u64,
}

impl DisorderSpec {
    pub fn gaussian(seed: u64) -> Self {
        DisorderSpec {
            family: DisorderFamily::Gaussian,
            seed,
        }
    }

    pub fn rademacher(seed: u64) -> Self {
        DisorderSpec {
            family: DisorderFamily::Rademacher,
            seed,
        }
    }

    /// Validates and builds a discrete law; the mean must vanish.
    pub fn discrete(values: Vec<f64>, probs: Vec<f64>, seed: u64) -> Result<Self> {
        let s = DisorderSpec {
            family: DisorderFamily::Discrete { values, probs },
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if let DisorderFamily::Discrete { values, probs } = &self.family {
            if values.is_empty() || values.len() != probs.len() {
                return domain("discrete disorder needs matching nonempty values and probs");
            }
            if values.iter().any(|v| !v.is_finite()) {
                return domain("discrete disorder values must be finite");
            }
            if probs.iter().any(|p| !(*p > 0.0) || !p.is_finite()) {
                return domain("discrete disorder probabilities must be positive");
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > 1e-12 {
                return domain(format!("discrete disorder probabilities sum to {total}"));
            }
            let mean: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
            if mean.abs() > 1e-12 {
                return domain(format!("discrete disorder has mean {mean}, expected 0"));
            }
        }
        Ok(())
    }

    /// `lambda(beta) = log Q[exp(beta omega)]`.
    pub fn log_mgf(&self, beta: f64) -> f64 {
        match &self.family {
            DisorderFamily::Gaussian => 0.5 * beta * beta,
            DisorderFamily::Rademacher => {
                let a = beta.abs();
                a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
            }
            DisorderFamily::Discrete { values, probs } => log_sum_exp(
                values
                    .iter()
                    .zip(probs)
                    .map(|(v, p)| p.ln() + beta * v)
                    .collect::<Vec<_>>(),
            ),
        }
    }

    /// `gamma(beta) = lambda(2 beta) - 2 lambda(beta)`.
    pub fn gamma(&self, beta: f64) -> f64 {
        self.log_mgf(2.0 * beta) - 2.0 * self.log_mgf(beta)
    }

    /// Variance `lambda''(0)`.
    pub fn variance(&self) -> f64 {
        match &self.family {
            DisorderFamily::Gaussian | DisorderFamily::Rademacher => 1.0,
            DisorderFamily::Discrete { values, probs } => values.iter().zip(probs).map(|(v, p)| p * v * v).sum(),
        }
    }

    /// Field for one replica.
    pub fn field(&self, replica: u64) -> OmegaField {
        OmegaField::new(self.clone(), replica)
    }
}

/// Smallest `C3` with `lambda(b) + lambda(-b) <= C3 b^2` on the grid.
pub fn fit_c3(spec: &DisorderSpec, betas: &[f64]) -> f64 {
    betas
        .iter()
        .filter(|b| **b > 0.0)
        .map(|&b| (spec.log_mgf(b) + spec.log_mgf(-b)) / (b * b))
        .fold(0.0, f64::max)
}

/// Largest `C4` with `lambda(beta - delta) - lambda(beta) - lambda(-delta)
/// <= -C4 beta delta`, at one point.
pub fn c4_hat(spec: &DisorderSpec, beta: f64, delta: f64) -> f64 {
    let d = spec.log_mgf(beta - delta) - spec.log_mgf(beta) - spec.log_mgf(-delta);
    -d / (beta * delta)
}

/// Minimum of [`c4_hat`] over a grid of `beta` at fixed `delta`.
pub fn fit_c4(spec: &DisorderSpec, betas: &[f64], delta: f64) -> f64 {
    betas
        .iter()
        .filter(|b| **b > 0.0)
        .map(|&b| c4_hat(spec, b, delta))
        .fold(f64::INFINITY, f64::min)
}

/// Read access to a disorder realization.
pub trait Environment: Sync {
    /// `omega(n, x)` for `n >= 1`.
    fn value(&self, n: usize, x: VertexId) -> f64;
}

enum Sampler {
    Gaussian(Normal),
    Rademacher,
    Discrete { values: Vec<f64>, cumulative: Vec<f64> },
}

/// One realization of the disorder, a pure function of
/// `(seed, replica, n, x)`.
pub struct OmegaField {
    spec: DisorderSpec,
    replica: u64,
    prefix: u64,
    sampler: Sampler,
}

impl OmegaField {
    pub fn new(spec: DisorderSpec, replica: u64) -> Self {
        let sampler = match &spec.family {
            DisorderFamily::Gaussian => Sampler::Gaussian(Normal::new(0.0, 1.0).expect("unit normal")),
            DisorderFamily::Rademacher => Sampler::Rademacher,
            DisorderFamily::Discrete { values, probs } => {
                let mut acc = 0.0;
                let cumulative = probs
                    .iter()
                    .map(|p| {
                        acc += p;
                        acc
                    })
                    .collect();
                Sampler::Discrete {
                    values: values.clone(),
                    cumulative,
                }
            }
        };
        OmegaField {
            prefix: stream_key(spec.seed, replica),
            spec,
            replica,
            sampler,
        }
    }

    pub fn spec(&self) -> &DisorderSpec {
        &self.spec
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    /// Checked access; time 0 carries no disorder.
    pub fn omega(&self, n: usize, x: VertexId) -> Result<f64> {
        if n == 0 {
            return Err(Error::Domain("omega is defined for times n >= 1".into()));
        }
        Ok(self.value(n, x))
    }

    /// View with `omega'(m, x) = omega(m + n0, x)`.
    pub fn time_shift(&self, n0: usize) -> TimeShifted<'_, Self> {
        TimeShifted { base: self, shift: n0 }
    }
}

impl Environment for OmegaField {
    #[inline]
    fn value(&self, n: usize, x: VertexId) -> f64 {
        debug_assert!(n >= 1);
        let bits = keyed(self.prefix, n as u64, x as u64);
        match &self.sampler {
            Sampler::Gaussian(normal) => normal.inverse_cdf(open_unit(bits)),
            Sampler::Rademacher => {
                if bits >> 63 == 1 {
                    1.0
                } else {
                    -1.0
                }
            }
            Sampler::Discrete { values, cumulative } => {
                let u = open_unit(bits);
                let i = cumulative.partition_point(|&c| c < u);
                values[i.min(values.len() - 1)]
            }
        }
    }
}

/// Time-shifted view of an environment.
pub struct TimeShifted<'a, E: Environment + ?Sized> {
    base: &'a E,
    shift: usize,
}

impl<'a, E: Environment + ?Sized> TimeShifted<'a, E> {
    pub fn new(base: &'a E, shift: usize) -> Self {
        TimeShifted { base, shift }
    }

    /// Shifting again adds the offsets.
    pub fn time_shift(&self, n0: usize) -> TimeShifted<'a, E> {
        TimeShifted {
            base: self.base,
            shift: self.shift + n0,
        }
    }

    pub fn shift(&self) -> usize {
        self.shift
    }
}

impl<E: Environment + ?Sized> Environment for TimeShifted<'_, E> {
    #[inline]
    fn value(&self, n: usize, x: VertexId) -> f64 {
        self.base.value(n + self.shift, x)
    }
}

/// `past` up to time `cutoff`, `future` afterwards: a fresh draw of the
/// disorder conditionally on the first `cutoff` time layers.
pub struct Spliced<'a, A: Environment + ?Sized, B: Environment + ?Sized> {
    pub past: &'a A,
    pub future: &'a B,
    pub cutoff: usize,
}

impl<A: Environment + ?Sized, B: Environment + ?Sized> Environment for Spliced<'_, A, B> {
    #[inline]
    fn value(&self, n: usize, x: VertexId) -> f64 {
        if n <= self.cutoff {
            self.past.value(n, x)
        } else {
            self.future.value(n, x)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_mgfs() {
        let g = DisorderSpec::gaussian(1);
        let r = DisorderSpec::rademacher(1);
        for b in [0.0, 0.3, 1.0, -2.0, 40.0] {
            assert_eq!(g.log_mgf(b), b * b / 2.0);
            assert!((r.log_mgf(b) - b.cosh().ln()).abs() < 1e-12 * (1.0 + b.abs()));
        }
        assert_eq!(g.gamma(0.7), 0.7 * 0.7 * (2.0 - 1.0));
        assert_eq!(r.log_mgf(0.0), 0.0);
        assert!(r.log_mgf(800.0).is_finite());
    }

    #[test]
    fn rademacher_gamma_near_zero() {
        let r = DisorderSpec::rademacher(0);
        let b = 0.01;
        assert!((r.gamma(b) / (b * b) - 1.0).abs() < 0.01);
    }

    #[test]
    fn discrete_validation() {
        assert!(DisorderSpec::discrete(vec![-1.0, 2.0], vec![2.0 / 3.0, 1.0 / 3.0], 0).is_ok());
        assert!(DisorderSpec::discrete(vec![0.0, 1.0], vec![0.5, 0.5], 0).is_err());
        assert!(DisorderSpec::discrete(vec![-1.0, 1.0], vec![0.5, 0.6], 0).is_err());
        let s = DisorderSpec::discrete(vec![-1.0, 1.0], vec![0.5, 0.5], 0).unwrap();
        assert!((s.log_mgf(0.8) - 0.8f64.cosh().ln()).abs() < 1e-14);
    }

    #[test]
    fn values_are_keyed() {
        let f = DisorderSpec::rademacher(9).field(2);
        let v = f.omega(5, 11).unwrap();
        assert!(v == 1.0 || v == -1.0);
        assert_eq!(v, f.omega(5, 11).unwrap());
        assert!(f.omega(0, 11).is_err());
        let g = DisorderSpec::gaussian(9).field(3);
        assert_eq!(g.value(4, 2).to_bits(), g.value(4, 2).to_bits());
    }

    #[test]
    fn shifts_compose() {
        let f = DisorderSpec::gaussian(5).field(0);
        let s0 = f.time_shift(0);
        let s3 = f.time_shift(3);
        let s35 = s3.time_shift(5);
        assert_eq!(s0.value(4, 7), f.value(4, 7));
        assert_eq!(s3.value(2, 7), f.value(5, 7));
        assert_eq!(s35.value(1, 7), f.value(9, 7));
    }

    #[test]
    fn c4_is_one_for_gaussian() {
        let g = DisorderSpec::gaussian(0);
        assert!((c4_hat(&g, 0.3, 0.01) - 1.0).abs() < 1e-12);
        let r = DisorderSpec::rademacher(0);
        assert!(fit_c4(&r, &[0.1, 0.2, 0.3], 0.01) > 0.0);
        assert!(fit_c3(&r, &[0.1, 0.5]) <= 1.0 + 1e-12);
    }
}
