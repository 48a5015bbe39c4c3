//! Oriented site percolation on `{(I, J): 0 <= J <= I, I - J even}` with
//! steps `(I, J) -> (I + 1, J +- 1)`.

use serde::Serialize;

use crate::error::{domain, Result};
use crate::rng::{keyed, open_unit, stream_key};
use crate::stats::wilson_interval;

/// Sites of rows `0..=horizon` in the total order: by row, then by `J`.
pub fn lattice_sites(horizon: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..=horizon {
        for j in (i % 2..=i).step_by(2) {
            out.push((i, j));
        }
    }
    out
}

/// Position of `(i, j)` in [`lattice_sites`].
pub fn site_offset(i: usize, j: usize) -> Option<usize> {
    if j > i || !(i - j).is_multiple_of(2) {
        return None;
    }
    // rows 0..i hold sum_{k<i} (k/2 + 1) sites
    let before = (0..i).map(|k| k / 2 + 1).sum::<usize>();
    Some(before + j / 2)
}

/// Whether an open path leads from `(0, 0)` to row `horizon`; `open` is
/// indexed as [`lattice_sites`].
pub fn survives(horizon: usize, open: &[bool]) -> bool {
    let mut reach = vec![false; horizon + 2];
    reach[0] = open[0];
    for i in 1..=horizon {
        let mut next = vec![false; horizon + 2];
        let mut any = false;
        for j in (i % 2..=i).step_by(2) {
            let from = (j > 0 && reach[j - 1]) || reach[j + 1];
            if from && open[site_offset(i, j).expect("lattice site")] {
                next[j] = true;
                any = true;
            }
        }
        if !any {
            return false;
        }
        reach = next;
    }
    reach.iter().any(|&r| r)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PercolationRun {
    pub rho: f64,
    pub horizon: usize,
    pub seed: u64,
    /// Indexed as [`lattice_sites`].
    pub open: Vec<bool>,
    pub survived: bool,
}

fn site_open(seed: u64, run: u64, i: usize, j: usize, rho: f64) -> bool {
    open_unit(keyed(stream_key(seed, run), i as u64, j as u64)) < rho
}

fn run_with(rho: f64, horizon: usize, seed: u64, run: u64) -> PercolationRun {
    let open: Vec<bool> = lattice_sites(horizon)
        .into_iter()
        .map(|(i, j)| site_open(seed, run, i, j, rho))
        .collect();
    let survived = survives(horizon, &open);
    PercolationRun {
        rho,
        horizon,
        seed,
        open,
        survived,
    }
}

/// One i.i.d. Bernoulli(`rho`) configuration. Site uniforms depend only on
/// `(seed, site)`, so configurations at different `rho` are coupled
/// monotonically.
pub fn percolation_simulate(rho: f64, horizon: usize, seed: u64) -> Result<PercolationRun> {
    if !(0.0..=1.0).contains(&rho) {
        return domain(format!("density {rho} is outside [0, 1]"));
    }
    Ok(run_with(rho, horizon, seed, 0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SurvivalRow {
    pub rho: f64,
    pub horizon: usize,
    pub runs: u64,
    pub survival: f64,
    pub stderr: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// Empirical survival frequency per density with 95% Wilson intervals. Run
/// `k` uses the same uniforms at every density.
pub fn survival_probability(rho_grid: &[f64], horizon: usize, runs: u64, seed: u64) -> Result<Vec<SurvivalRow>> {
    if runs == 0 {
        return domain("survival estimate needs at least one run");
    }
    let mut out = Vec::with_capacity(rho_grid.len());
    for &rho in rho_grid {
        if !(0.0..=1.0).contains(&rho) {
            return domain(format!("density {rho} is outside [0, 1]"));
        }
        let hits = (0..runs).filter(|&k| run_with(rho, horizon, seed, k).survived).count() as u64;
        let p = hits as f64 / runs as f64;
        let (ci_lo, ci_hi) = wilson_interval(hits, runs, 1.959963984540054);
        out.push(SurvivalRow {
            rho,
            horizon,
            runs,
            survival: p,
            stderr: (p * (1.0 - p) / runs as f64).sqrt(),
            ci_lo,
            ci_hi,
        });
    }
    Ok(out)
}
