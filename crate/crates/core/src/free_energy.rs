//! Quenched and annealed free energies, fluctuation diagnostics and the
//! gap-scaling scan.

use rayon::prelude::*;
use serde::Serialize;

use crate::environment::DisorderSpec;
use crate::error::{Error, Result};
use crate::graph::{VertexId, WeightedGraph};
use crate::polymer::{partition_function, partition_trace};
use crate::stats::{linear_fit, mean_stderr, t_quantile, weighted_linear_fit};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FreeEnergyEstimate {
    pub beta: f64,
    pub n: usize,
    pub replicas: usize,
    /// Replica mean of `(1/n) log Z_n`.
    pub fq_hat: f64,
    pub fq_stderr: f64,
    /// `lambda(beta)`, exact.
    pub fa: f64,
    pub gap: f64,
    pub gap_stderr: f64,
}

impl FreeEnergyEstimate {
    /// Gap divided by its standard error; infinite for an exact positive gap.
    pub fn significance(&self) -> f64 {
        if self.gap_stderr > 0.0 {
            self.gap / self.gap_stderr
        } else if self.gap > 0.0 {
            f64::INFINITY
        } else {
            0.0
        }
    }
}

/// `log Z_n^x` for replicas `0..replicas`, in replica order.
pub fn replica_log_z(
    g: &WeightedGraph,
    spec: &DisorderSpec,
    x: VertexId,
    beta: f64,
    n: usize,
    replicas: usize,
) -> Result<Vec<f64>> {
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| partition_function(g, &spec.field(r), x, n, beta))
        .collect()
}

/// `W_n^x` for replicas `0..replicas`, in replica order.
pub fn replica_w(
    g: &WeightedGraph,
    spec: &DisorderSpec,
    x: VertexId,
    beta: f64,
    n: usize,
    replicas: usize,
) -> Result<Vec<f64>> {
    let lambda = spec.log_mgf(beta);
    Ok(replica_log_z(g, spec, x, beta, n, replicas)?
        .into_iter()
        .map(|lz| (lz - n as f64 * lambda).exp())
        .collect())
}

pub fn estimate_free_energy(
    g: &WeightedGraph,
    spec: &DisorderSpec,
    beta: f64,
    n: usize,
    replicas: usize,
) -> Result<FreeEnergyEstimate> {
    if replicas < 2 {
        return Err(Error::Domain(format!("need at least 2 replicas, got {replicas}")));
    }
    if n == 0 {
        return Err(Error::Domain("horizon must be positive".into()));
    }
    let logs = replica_log_z(g, spec, g.origin(), beta, n, replicas)?;
    let per_step: Vec<f64> = logs.iter().map(|l| l / n as f64).collect();
    let s = mean_stderr(&per_step);
    let fa = spec.log_mgf(beta);
    Ok(FreeEnergyEstimate {
        beta,
        n,
        replicas,
        fq_hat: s.mean,
        fq_stderr: s.stderr,
        fa,
        gap: fa - s.mean,
        gap_stderr: s.stderr,
    })
}

/// One row of the per-replica trace output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub replica: u64,
    pub n: usize,
    #[serde(rename = "logZ")]
    pub log_z: f64,
    #[serde(rename = "logW")]
    pub log_w: f64,
}

pub fn replica_traces(
    g: &WeightedGraph,
    spec: &DisorderSpec,
    beta: f64,
    checkpoints: &[usize],
    replicas: usize,
) -> Result<Vec<TraceRow>> {
    let lambda = spec.log_mgf(beta);
    let per: Vec<Vec<TraceRow>> = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let t = partition_trace(g, &spec.field(r), g.origin(), checkpoints, beta, lambda)?;
            Ok(t.into_iter()
                .map(|(n, log_z, log_w)| TraceRow {
                    replica: r,
                    n,
                    log_z,
                    log_w,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationReport {
    /// `(n, sample variance of log Z_n)`.
    pub rows: Vec<(usize, f64)>,
    /// Slope of the variance against `n`, the fitted `K`.
    pub k_hat: f64,
    pub residual_rms: f64,
    /// `max_n variance(n) / n`.
    pub max_ratio: f64,
}

pub fn concentration_check(
    g: &WeightedGraph,
    spec: &DisorderSpec,
    beta: f64,
    n_grid: &[usize],
    replicas: usize,
) -> Result<ConcentrationReport> {
    if replicas < 2 {
        return Err(Error::Domain(format!("need at least 2 replicas, got {replicas}")));
    }
    let traces = replica_traces(g, spec, beta, n_grid, replicas)?;
    let mut rows = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let vals: Vec<f64> = traces.iter().filter(|t| t.n == n).map(|t| t.log_z).collect();
        rows.push((n, mean_stderr(&vals).variance));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let fit = linear_fit(&xs, &ys)?;
    let max_ratio = rows
        .iter()
        .filter(|r| r.0 > 0)
        .map(|r| r.1 / r.0 as f64)
        .fold(0.0, f64::max);
    Ok(ConcentrationReport {
        rows,
        k_hat: fit.slope,
        residual_rms: fit.residual_rms,
        max_ratio,
    })
}

/// `n(beta) = ceil(c1 beta^{-exponent})`, at least `min_n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HorizonSchedule {
    pub c1: f64,
    pub exponent: f64,
    pub min_n: usize,
}

impl HorizonSchedule {
    pub fn horizon(&self, beta: f64) -> usize {
        let n = (self.c1 * beta.powf(-self.exponent)).ceil();
        (n as usize).max(self.min_n)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub points: usize,
    /// Betas left out because their gap is not resolved above noise.
    pub excluded: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapScan {
    pub graph: String,
    pub ds: f64,
    pub estimates: Vec<FreeEnergyEstimate>,
    pub theoretical_exponent: f64,
}

impl GapScan {
    pub fn new(graph: impl Into<String>, ds: f64, estimates: Vec<FreeEnergyEstimate>) -> Result<Self> {
        if estimates.windows(2).any(|w| !(w[0].beta < w[1].beta)) {
            return Err(Error::Domain("beta grid must be strictly increasing".into()));
        }
        Ok(GapScan {
            graph: graph.into(),
            ds,
            estimates,
            theoretical_exponent: 4.0 / (2.0 - ds),
        })
    }

    /// Scan whose gaps follow `prefactor beta^exponent` exactly, with zero
    /// standard errors.
    pub fn synthetic(graph: impl Into<String>, ds: f64, betas: &[f64], exponent: f64, prefactor: f64) -> Result<Self> {
        let estimates = betas
            .iter()
            .map(|&beta| {
                let gap = prefactor * beta.powf(exponent);
                FreeEnergyEstimate {
                    beta,
                    n: 0,
                    replicas: 0,
                    fq_hat: -gap,
                    fq_stderr: 0.0,
                    fa: 0.0,
                    gap,
                    gap_stderr: 0.0,
                }
            })
            .collect();
        GapScan::new(graph, ds, estimates)
    }

    /// Whether each estimate is resolved well enough to enter the fit:
    /// a positive gap at least three standard errors above zero.
    pub fn usable(&self) -> Vec<bool> {
        self.estimates
            .iter()
            .map(|e| e.gap > 0.0 && e.gap >= 3.0 * e.gap_stderr)
            .collect()
    }
}

/// Runs the scan over a strictly increasing beta grid. All grid points share
/// the disorder replicas `0..replicas` of `spec`.
pub fn gap_scan(
    g: &WeightedGraph,
    spec: &DisorderSpec,
    betas: &[f64],
    schedule: &HorizonSchedule,
    replicas: usize,
    ds: f64,
) -> Result<GapScan> {
    let estimates = betas
        .iter()
        .map(|&b| estimate_free_energy(g, spec, b, schedule.horizon(b), replicas))
        .collect::<Result<Vec<_>>>()?;
    GapScan::new(g.family().tag(), ds, estimates)
}

/// Least squares of `log gap` on `log beta` over the usable points, at 95%
/// confidence.
///
/// Weights are the inverse delta-method variances `(gap / gap_stderr)^2` of
/// `log gap`. A point with zero standard error is exact: with two or more
/// exact points only those are fitted, and a single exact point pins the
/// line while the others set its slope.
pub fn fit_exponent(scan: &GapScan) -> Result<ExponentFit> {
    let usable = scan.usable();
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for (e, ok) in scan.estimates.iter().zip(&usable) {
        if *ok {
            pts.push((e.beta.ln(), e.gap.ln(), e.gap_stderr / e.gap));
        } else {
            excluded.push(e.beta);
        }
    }
    if pts.len() < 3 {
        return Err(Error::Regression(format!(
            "{} usable gap estimates, need at least 3; excluded betas {:?}",
            pts.len(),
            excluded
        )));
    }
    let exact: Vec<(f64, f64)> = pts.iter().filter(|p| p.2 == 0.0).map(|p| (p.0, p.1)).collect();
    let (slope, intercept, stderr, dof) = if exact.len() >= 2 {
        let (xs, ys): (Vec<f64>, Vec<f64>) = exact.iter().copied().unzip();
        let f = linear_fit(&xs, &ys)?;
        (f.slope, f.intercept, f.slope_stderr, exact.len().saturating_sub(2))
    } else if exact.len() == 1 {
        let (x0, y0) = exact[0];
        let others: Vec<(f64, f64, f64)> = pts.iter().filter(|p| p.2 > 0.0).copied().collect();
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for &(x, y, rel) in &others {
            let w = rel.powi(-2);
            sxy += w * (x - x0) * (y - y0);
            sxx += w * (x - x0).powi(2);
        }
        if !(sxx > 0.0) {
            return Err(Error::Regression("degenerate abscissae".into()));
        }
        let slope = sxy / sxx;
        let ssr: f64 = others
            .iter()
            .map(|&(x, y, rel)| rel.powi(-2) * (y - y0 - slope * (x - x0)).powi(2))
            .sum();
        let dof = others.len().saturating_sub(1);
        let stderr = if dof > 0 { (ssr / dof as f64 / sxx).sqrt() } else { 0.0 };
        (slope, y0 - slope * x0, stderr, dof)
    } else {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        let ws: Vec<f64> = pts.iter().map(|p| p.2.powi(-2)).collect();
        let f = weighted_linear_fit(&xs, &ys, &ws)?;
        (f.slope, f.intercept, f.slope_stderr, pts.len() - 2)
    };
    let half = if stderr > 0.0 {
        t_quantile(0.95, dof) * stderr
    } else {
        0.0
    };
    Ok(ExponentFit {
        slope,
        intercept,
        ci_lo: slope - half,
        ci_hi: slope + half,
        points: pts.len(),
        excluded,
    })
}
