//! Finite-window checks that thinned site states dominate a Bernoulli field.
//!
//! With `Z = X Y` for an independent Bernoulli(`r`) field `Y`, the lower
//! bound `P(Z_s = 1 | Z_t, t < s) >= alpha r` is checked empirically, the
//! conditioning restricted to the states of the `window` sites preceding `s`
//! in the total order.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::coarse_grain::lattice::{sample_site_states, CGLattice};
use crate::environment::DisorderSpec;
use crate::error::{domain, Result};
use crate::rng::{keyed, open_unit, stream_key};
use crate::stats::wilson_interval;

/// Which of `(1 - alpha)(1 - r)^5 >= eps` and `(1 - alpha) alpha^5 >= eps`
/// hold; the thinning argument needs both.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Feasibility {
    pub r_branch: bool,
    pub alpha_branch: bool,
    pub feasible: bool,
}

pub fn constraint_feasibility(eps: f64, alpha: f64, r: f64) -> Feasibility {
    let r_branch = (1.0 - alpha) * (1.0 - r).powi(5) >= eps;
    let alpha_branch = (1.0 - alpha) * alpha.powi(5) >= eps;
    Feasibility {
        r_branch,
        alpha_branch,
        feasible: r_branch && alpha_branch,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DominationOptions {
    /// Number of preceding sites in the conditioning pattern.
    pub window: usize,
    /// Patterns seen fewer times are not tested.
    pub min_count: u64,
    /// Seed of the `Y` field.
    pub seed: u64,
}

impl Default for DominationOptions {
    fn default() -> Self {
        DominationOptions {
            window: 3,
            min_count: 30,
            seed: 0,
        }
    }
}

/// Conditional frequency of `Z_s = 1` given one pattern of preceding states.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PatternRow {
    pub i: usize,
    pub j: usize,
    /// Preceding states, nearest first, as `0`/`1`.
    pub pattern: String,
    pub trials: u64,
    pub successes: u64,
    pub frequency: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub violation: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominationReport {
    pub alpha: f64,
    pub r: f64,
    pub bound: f64,
    /// `1 - min P(X_s = 1 | pattern)` over tested patterns.
    pub epsilon_hat: f64,
    pub feasibility: Feasibility,
    pub samples: u64,
    pub rows: Vec<PatternRow>,
    pub violations: usize,
}

fn pattern_key(states: &[bool], k: usize, window: usize) -> String {
    (1..=window.min(k))
        .map(|d| if states[k - d] { '1' } else { '0' })
        .collect()
}

fn conditional_table(
    fields: &[Vec<bool>],
    sites: &[(usize, usize)],
    min_count: u64,
    window: usize,
) -> BTreeMap<(usize, String), (u64, u64)> {
    let mut table: BTreeMap<(usize, String), (u64, u64)> = BTreeMap::new();
    for f in fields {
        for k in 0..sites.len() {
            let e = table.entry((k, pattern_key(f, k, window))).or_insert((0, 0));
            e.0 += 1;
            e.1 += f[k] as u64;
        }
    }
    table.retain(|_, v| v.0 >= min_count);
    table
}

/// The check on given `X` samples, each a state vector in the total order
/// of `sites`.
pub fn domination_from_states(
    x_samples: &[Vec<bool>],
    sites: &[(usize, usize)],
    alpha: f64,
    r: f64,
    opts: &DominationOptions,
) -> Result<DominationReport> {
    if !(alpha > 0.0 && alpha < 1.0) || !(0.0..=1.0).contains(&r) {
        return domain(format!("need alpha in (0, 1) and r in [0, 1], got {alpha}, {r}"));
    }
    if x_samples.is_empty() {
        return domain("domination check needs samples");
    }
    if x_samples.iter().any(|x| x.len() != sites.len()) {
        return domain("state vectors do not match the lattice");
    }
    let x_table = conditional_table(x_samples, sites, opts.min_count, opts.window);
    let epsilon_hat = x_table
        .values()
        .map(|&(t, s)| 1.0 - s as f64 / t as f64)
        .fold(0.0, f64::max);

    let z: Vec<Vec<bool>> = x_samples
        .iter()
        .enumerate()
        .map(|(m, x)| {
            let key = stream_key(opts.seed, m as u64);
            x.iter()
                .enumerate()
                .map(|(k, &xi)| xi && open_unit(keyed(key, k as u64, 0)) < r)
                .collect()
        })
        .collect();
    let bound = alpha * r;
    let z_table = conditional_table(&z, sites, opts.min_count, opts.window);
    let rows: Vec<PatternRow> = z_table
        .into_iter()
        .map(|((k, pattern), (trials, successes))| {
            let (ci_lo, ci_hi) = wilson_interval(successes, trials, 1.959963984540054);
            PatternRow {
                i: sites[k].0,
                j: sites[k].1,
                pattern,
                trials,
                successes,
                frequency: successes as f64 / trials as f64,
                ci_lo,
                ci_hi,
                violation: ci_hi < bound,
            }
        })
        .collect();
    let violations = rows.iter().filter(|r| r.violation).count();
    Ok(DominationReport {
        alpha,
        r,
        bound,
        epsilon_hat,
        feasibility: constraint_feasibility(epsilon_hat, alpha, r),
        samples: x_samples.len() as u64,
        rows,
        violations,
    })
}

/// Samples `X` over `samples` disorder replicas and runs
/// [`domination_from_states`].
#[allow(clippy::too_many_arguments)]
pub fn domination_check(
    lattice: &CGLattice,
    spec: &DisorderSpec,
    beta: f64,
    c_tilde: f64,
    r: f64,
    alpha: f64,
    samples: u64,
    opts: &DominationOptions,
) -> Result<DominationReport> {
    let x = sample_site_states(lattice, spec, beta, c_tilde, samples)?;
    domination_from_states(&x, &lattice.sites, alpha, r, opts)
}
