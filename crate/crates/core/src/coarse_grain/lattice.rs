//! The coarse-grained space-time lattice, its tube blocks, and the open/closed
//! site states with their optimal paths.
//!
//! A site `(I, J)` stands for the block `[I n, (I+1) n] x B~_J`. Its state
//! is decided by the polymer measure restricted to the optimal path `Gamma^opt`
//! of `(I, J)` and then pushed one block further towards `B_{J+1}` and
//! `B_{J-1}`: the site is open when both ratios `W~_{(I,J),+-}` reach `c~`.
//! Fronts are carried as a normalized measure on `B_J` plus the log of the
//! restricted partition function, and one block is an `n`-step iteration of
//! the tube-restricted kernel with the environment weights.

use rayon::prelude::*;
use serde::Serialize;

use crate::coarse_grain::percolation::{lattice_sites, site_offset, survives};
use crate::environment::{DisorderSpec, Environment, Spliced};
use crate::error::{domain, Error, Result};
use crate::graph::{ensure_clear_of_boundary, GeodesicRay, VertexId, VertexSet, WeightedGraph};
use crate::rng::derive_seed;
use crate::stats::wilson_interval;
use crate::walk::{block_radius_for, collision_moment, tube_balls, LocalChain, PAIR_STATE_CAP};

#[derive(Clone, Debug)]
struct Block {
    chain: LocalChain,
    up: Vec<f64>,
    down: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct CGLattice {
    pub i_max: usize,
    /// Block length.
    pub n: usize,
    pub n_w: u32,
    pub c7: f64,
    pub ray: GeodesicRay,
    /// Sites of rows `0..=i_max` in the total order.
    pub sites: Vec<(usize, usize)>,
    inner: Vec<VertexSet>,
    outer: Vec<VertexSet>,
    blocks: Vec<Block>,
}

impl CGLattice {
    /// `B_J`, for `J <= i_max + 1`.
    pub fn inner(&self, j: usize) -> &VertexSet {
        &self.inner[j]
    }

    /// `B~_J`, for `J <= i_max + 1`.
    pub fn outer(&self, j: usize) -> &VertexSet {
        &self.outer[j]
    }

    pub fn center(&self, j: usize) -> VertexId {
        self.ray.at(j * self.n_w as usize)
    }

    pub fn start(&self) -> VertexId {
        self.ray.at(0)
    }

    /// Smallest `k` such that `B~_J` and `B~_K` are disjoint whenever
    /// `|J - K| >= k`, over the balls of the lattice; `None` if no
    /// separation suffices within the lattice.
    pub fn disjointness_cutoff(&self) -> Option<usize> {
        let m = self.outer.len();
        let mut cutoff = 1;
        for a in 0..m {
            for b in a + 1..m {
                if !self.outer[a].is_disjoint(&self.outer[b]) {
                    cutoff = cutoff.max(b - a + 1);
                }
            }
        }
        if cutoff >= m {
            None
        } else {
            Some(cutoff)
        }
    }

    /// One block from the normalized measure `nu` on `B_J` starting at time
    /// `t0`: the unnormalized end measure at time `t0 + n` on `B~_J` and its
    /// log scale.
    fn run_block<E: Environment + ?Sized>(
        &self,
        env: &E,
        j: usize,
        nu: &[(VertexId, f64)],
        t0: usize,
        beta: f64,
        lambda: f64,
    ) -> (Vec<f64>, f64) {
        let chain = &self.blocks[j].chain;
        let members = chain.members();
        let m = chain.len();
        let mut f = vec![0.0; m];
        for &(v, p) in nu {
            f[chain.index_of(v).expect("front inside its tube")] += p;
        }
        let mut next = vec![0.0; m];
        let mut log_scale = 0.0;
        for k in 1..=self.n {
            chain.forward_step(&f, &mut next);
            if beta != 0.0 {
                let t = t0 + k;
                for (i, x) in next.iter_mut().enumerate() {
                    if *x != 0.0 {
                        *x *= (beta * env.value(t, members[i]) - lambda).exp();
                    }
                }
            }
            let s: f64 = next.iter().sum();
            if !(s > 0.0) {
                return (vec![0.0; m], f64::NEG_INFINITY);
            }
            next.iter_mut().for_each(|x| *x /= s);
            log_scale += s.ln();
            std::mem::swap(&mut f, &mut next);
        }
        (f, log_scale)
    }

    fn finish(&self, j: usize, f: &[f64], log_scale: f64, mask: &[f64]) -> (f64, Vec<(VertexId, f64)>) {
        let members = self.blocks[j].chain.members();
        let mass: f64 = f.iter().zip(mask).map(|(a, b)| a * b).sum();
        if !(mass > 0.0) || log_scale == f64::NEG_INFINITY {
            return (f64::NEG_INFINITY, Vec::new());
        }
        let nu = f
            .iter()
            .zip(mask)
            .enumerate()
            .filter(|(_, (a, b))| **a * **b > 0.0)
            .map(|(i, (a, _))| (members[i], a / mass))
            .collect();
        (mass.ln() + log_scale, nu)
    }
}

/// Builds the lattice of rows `0..=i_max` with blocks of length `n` along
/// `ray`, and checks the ball invariants.
pub fn build_cg_lattice(g: &WeightedGraph, ray: &GeodesicRay, n: usize, c7: f64, i_max: usize) -> Result<CGLattice> {
    if !(c7 >= 5.0) || !c7.is_finite() {
        return domain(format!("C7 must be at least 5, got {c7}"));
    }
    if n == 0 {
        return domain("block length must be positive");
    }
    let n_w = block_radius_for(g, n)?;
    if n_w == 0 {
        return domain(format!("block radius vanishes at n = {n}"));
    }
    let outer_r = (c7 * n_w as f64).floor() as u32;
    let need = (i_max + 1) * n_w as usize + outer_r as usize;
    if ray.len() <= need {
        return Err(Error::Size {
            what: "ray length",
            requested: need as u64 + 1,
            cap: ray.len() as u64,
        });
    }
    let mut inner = Vec::with_capacity(i_max + 2);
    let mut outer = Vec::with_capacity(i_max + 2);
    for j in 0..=i_max + 1 {
        ensure_clear_of_boundary(g, ray.at(j * n_w as usize), outer_r)?;
        let (a, b) = tube_balls(g, ray, j, n_w, c7)?;
        inner.push(a);
        outer.push(b);
    }
    for j in 0..=i_max + 1 {
        for k in 0..=i_max + 1 {
            if j.abs_diff(k) <= 1 && !inner[j].is_subset(&outer[k]) {
                return domain(format!("B_{j} is not inside B~_{k}"));
            }
            if j.abs_diff(k) as f64 >= 2.0 * c7 + 2.0 && !outer[j].is_disjoint(&outer[k]) {
                return domain(format!("B~_{j} and B~_{k} overlap"));
            }
        }
    }
    let mut blocks = Vec::with_capacity(i_max + 1);
    for j in 0..=i_max {
        let chain = LocalChain::new(g, outer[j].members())?;
        let up = chain.indicator(&inner[j + 1]);
        let down = (j > 0).then(|| chain.indicator(&inner[j - 1]));
        blocks.push(Block { chain, up, down });
    }
    Ok(CGLattice {
        i_max,
        n,
        n_w,
        c7,
        ray: ray.clone(),
        sites: lattice_sites(i_max),
        inner,
        outer,
        blocks,
    })
}

/// `min P_x(S_i in B~_J, i <= n; S_n in B_{J+-1})` over `J <= i_max`, both
/// directions and `x in B_J`.
pub fn tube_constant(lattice: &CGLattice) -> f64 {
    let mut c = f64::INFINITY;
    for (j, b) in lattice.blocks.iter().enumerate() {
        let mut dirs = vec![&b.up];
        if let Some(d) = &b.down {
            dirs.push(d);
        }
        for mask in dirs {
            let h = b.chain.backward(lattice.n, mask, None);
            for &v in lattice.inner[j].members() {
                c = c.min(h[b.chain.index_of(v).expect("inner ball inside tube")]);
            }
        }
    }
    c
}

/// State of one site together with the data that decided it.
#[derive(Clone, Debug, Serialize)]
pub struct SiteRecord {
    pub i: usize,
    pub j: usize,
    pub open: bool,
    /// The restricted weight vanished on the way here or in this block.
    pub starved: bool,
    /// `log W~_{(I,J),+}`
    pub log_ratio_up: f64,
    /// `log W~_{(I,J),-}`, absent at `J = 0`.
    pub log_ratio_down: Option<f64>,
    /// `Gamma^opt`, `gamma_0 = 0, ..., gamma_I = J`.
    pub path: Vec<usize>,
    /// Open sites on `Gamma^opt` strictly before `(I, J)`.
    pub open_before: usize,
    /// `log W_{In}(Omega_I(Gamma^opt))`
    pub log_w: f64,
    /// `nu_{(I,J)}` on `B_J`.
    pub nu: Vec<(VertexId, f64)>,
}

impl SiteRecord {
    pub fn log_ratio(&self, direction: i32) -> Option<f64> {
        match direction {
            1 => Some(self.log_ratio_up),
            -1 => self.log_ratio_down,
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
struct Front {
    nu: Vec<(VertexId, f64)>,
    log_w: f64,
    path: Vec<usize>,
    open_before: usize,
}

/// Records of one row plus the end measures needed to move to the next.
#[derive(Clone, Debug)]
pub struct RowEvaluation {
    pub records: Vec<SiteRecord>,
    up: Vec<Vec<(VertexId, f64)>>,
    down: Vec<Vec<(VertexId, f64)>>,
}

/// Row-by-row construction of the site states. Evaluating a row reads the
/// environment on `(I n, (I+1) n]` only; the optimal paths into the next
/// row depend on the states of rows `<= I`.
#[derive(Clone, Debug)]
pub struct StateBuilder<'a> {
    lattice: &'a CGLattice,
    beta: f64,
    lambda: f64,
    c_tilde: f64,
    row: usize,
    fronts: Vec<Front>,
}

impl<'a> StateBuilder<'a> {
    pub fn new(lattice: &'a CGLattice, beta: f64, lambda: f64, c_tilde: f64) -> Result<Self> {
        if !(c_tilde > 0.0 && c_tilde < 1.0) {
            return domain(format!("threshold must lie in (0, 1), got {c_tilde}"));
        }
        Ok(StateBuilder {
            lattice,
            beta,
            lambda,
            c_tilde,
            row: 0,
            fronts: vec![Front {
                nu: vec![(lattice.start(), 1.0)],
                log_w: 0.0,
                path: vec![0],
                open_before: 0,
            }],
        })
    }

    pub fn row(&self) -> usize {
        self.row
    }

    pub fn evaluate_row<E: Environment + ?Sized>(&self, env: &E) -> RowEvaluation {
        let lat = self.lattice;
        let t0 = self.row * lat.n;
        let threshold = self.c_tilde.ln();
        let mut records = Vec::with_capacity(self.fronts.len());
        let mut up = Vec::with_capacity(self.fronts.len());
        let mut down = Vec::with_capacity(self.fronts.len());
        for front in &self.fronts {
            let j = *front.path.last().expect("nonempty path");
            let block = &lat.blocks[j];
            let (f, scale) = if front.nu.is_empty() {
                (vec![0.0; block.chain.len()], f64::NEG_INFINITY)
            } else {
                lat.run_block(env, j, &front.nu, t0, self.beta, self.lambda)
            };
            let (log_up, nu_up) = lat.finish(j, &f, scale, &block.up);
            let (log_down, nu_down) = match &block.down {
                Some(mask) => {
                    let (l, nu) = lat.finish(j, &f, scale, mask);
                    (Some(l), nu)
                }
                None => (None, Vec::new()),
            };
            let open = log_up >= threshold && log_down.is_none_or(|l| l >= threshold);
            let starved = front.nu.is_empty() || log_up == f64::NEG_INFINITY || log_down == Some(f64::NEG_INFINITY);
            records.push(SiteRecord {
                i: self.row,
                j,
                open,
                starved,
                log_ratio_up: log_up,
                log_ratio_down: log_down,
                path: front.path.clone(),
                open_before: front.open_before,
                log_w: front.log_w,
                nu: front.nu.clone(),
            });
            up.push(nu_up);
            down.push(nu_down);
        }
        RowEvaluation { records, up, down }
    }

    /// Chooses `Gamma^opt` for every site of the next row: most open sites,
    /// then the lexicographically smallest path.
    pub fn advance(&mut self, eval: RowEvaluation) {
        let next_row = self.row + 1;
        let pos = |j: usize| (j - self.row % 2) / 2;
        let mut fronts = Vec::with_capacity(next_row / 2 + 1);
        for jn in (next_row % 2..=next_row).step_by(2) {
            let mut best: Option<(usize, usize, i32)> = None;
            let candidates = [(jn.checked_sub(1), 1), (Some(jn + 1).filter(|&j| j <= self.row), -1)];
            for (pred, dir) in candidates {
                let Some(jp) = pred else { continue };
                let k = pos(jp);
                let rec = &eval.records[k];
                let score = rec.open_before + rec.open as usize;
                let better = match best {
                    None => true,
                    Some((bk, bs, _)) => score > bs || (score == bs && rec.path < eval.records[bk].path),
                };
                if better {
                    best = Some((k, score, dir));
                }
            }
            let (k, score, dir) = best.expect("every site has a predecessor");
            let rec = &eval.records[k];
            let (log_ratio, nu) = if dir == 1 {
                (rec.log_ratio_up, eval.up[k].clone())
            } else {
                (
                    rec.log_ratio_down.expect("down ratio off the axis"),
                    eval.down[k].clone(),
                )
            };
            let mut path = rec.path.clone();
            path.push(jn);
            fronts.push(Front {
                nu,
                log_w: rec.log_w + log_ratio,
                path,
                open_before: score,
            });
        }
        self.fronts = fronts;
        self.row = next_row;
    }
}

/// Site states of the whole lattice for one environment.
#[derive(Clone, Debug, Serialize)]
pub struct SiteStateField {
    pub i_max: usize,
    pub beta: f64,
    pub c_tilde: f64,
    /// In the total order.
    pub records: Vec<SiteRecord>,
}

impl SiteStateField {
    pub fn record(&self, i: usize, j: usize) -> Option<&SiteRecord> {
        if i > self.i_max {
            return None;
        }
        site_offset(i, j).map(|k| &self.records[k])
    }

    pub fn state(&self, i: usize, j: usize) -> bool {
        self.record(i, j).is_some_and(|r| r.open)
    }

    pub fn states(&self) -> Vec<bool> {
        self.records.iter().map(|r| r.open).collect()
    }

    /// Open path from `(0, 0)` to the last row.
    pub fn survives(&self) -> bool {
        survives(self.i_max, &self.states())
    }

    /// `sum_{L < I} log W~` along `Gamma^opt` of `(i, j)`, each ratio taken
    /// from the record of the site the path passes through.
    pub fn path_log_product(&self, i: usize, j: usize) -> Option<f64> {
        let rec = self.record(i, j)?;
        let mut acc = 0.0;
        for l in 0..i {
            let dir = if rec.path[l + 1] > rec.path[l] { 1 } else { -1 };
            acc += self.record(l, rec.path[l])?.log_ratio(dir)?;
        }
        Some(acc)
    }
}

/// Assigns states row by row from one environment; `lambda` is
/// `lambda(beta)`.
pub fn assign_site_states<E: Environment + ?Sized>(
    lattice: &CGLattice,
    env: &E,
    beta: f64,
    lambda: f64,
    c_tilde: f64,
) -> Result<SiteStateField> {
    let mut builder = StateBuilder::new(lattice, beta, lambda, c_tilde)?;
    let mut records = Vec::with_capacity(lattice.sites.len());
    loop {
        let eval = builder.evaluate_row(env);
        records.extend(eval.records.iter().cloned());
        if builder.row() == lattice.i_max {
            break;
        }
        builder.advance(eval);
    }
    Ok(SiteStateField {
        i_max: lattice.i_max,
        beta,
        c_tilde,
        records,
    })
}

/// State vectors, in the total order, of replicas `0..replicas`.
pub fn sample_site_states(
    lattice: &CGLattice,
    spec: &DisorderSpec,
    beta: f64,
    c_tilde: f64,
    replicas: u64,
) -> Result<Vec<Vec<bool>>> {
    let lambda = spec.log_mgf(beta);
    (0..replicas)
        .into_par_iter()
        .map(|k| {
            let field = spec.field(k);
            assign_site_states(lattice, &field, beta, lambda, c_tilde).map(|s| s.states())
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionalSite {
    pub i: usize,
    pub j: usize,
    pub trials: u64,
    pub successes: u64,
    pub frequency: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `E[W~_+ | F_{In}]`
    pub mean_up: f64,
    /// `Var[W~_+ | F_{In}] / E[W~_+ | F_{In}]^2`
    pub ratio_up: f64,
    pub mean_down: Option<f64>,
    pub ratio_down: Option<f64>,
    /// Chebyshev lower bound on `P(X = 1 | F_{In})` from the two moments.
    pub chebyshev_lower: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionalReport {
    pub row: usize,
    pub beta: f64,
    pub c_tilde: f64,
    pub past_replica: u64,
    pub samples: u64,
    pub sites: Vec<ConditionalSite>,
    /// Largest variance ratio over the row.
    pub max_ratio: f64,
}

/// Frequency of `X_{(row, J)} = 1` over fresh disorder after time
/// `row * n`, with the past fixed to replica `past_replica`, next to the
/// exact conditional first and second moments of the ratios.
pub fn conditional_density_check(
    lattice: &CGLattice,
    spec: &DisorderSpec,
    beta: f64,
    c_tilde: f64,
    row: usize,
    past_replica: u64,
    samples: u64,
) -> Result<ConditionalReport> {
    if samples < 2 {
        return domain(format!("conditional check needs at least 2 samples, got {samples}"));
    }
    if row > lattice.i_max {
        return domain(format!("row {row} is beyond the lattice horizon {}", lattice.i_max));
    }
    let lambda = spec.log_mgf(beta);
    let past = spec.field(past_replica);
    let mut builder = StateBuilder::new(lattice, beta, lambda, c_tilde)?;
    while builder.row() < row {
        let eval = builder.evaluate_row(&past);
        builder.advance(eval);
    }

    let fresh = DisorderSpec {
        family: spec.family.clone(),
        seed: derive_seed(spec.seed, past_replica.wrapping_add(1)),
    };
    let cutoff = row * lattice.n;
    let outcomes: Vec<Vec<bool>> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let future = fresh.field(k);
            let env = Spliced {
                past: &past,
                future: &future,
                cutoff,
            };
            builder.evaluate_row(&env).records.iter().map(|r| r.open).collect()
        })
        .collect();

    let gamma = spec.gamma(beta);
    let z = 1.959963984540054;
    let mut sites = Vec::with_capacity(builder.fronts.len());
    for (k, front) in builder.fronts.iter().enumerate() {
        let j = *front.path.last().expect("nonempty path");
        let block = &lattice.blocks[j];
        let chain = &block.chain;
        let m = chain.len();
        let mut init = vec![0.0; m];
        for &(v, p) in &front.nu {
            init[chain.index_of(v).expect("front inside its tube")] += p;
        }
        let mut pair = vec![0.0; m * m];
        for a in 0..m {
            if init[a] == 0.0 {
                continue;
            }
            for b in 0..m {
                pair[a * m + b] = init[a] * init[b];
            }
        }
        let moments = |mask: &[f64]| -> Result<(f64, f64)> {
            let h = chain.backward(lattice.n, mask, None);
            let mean: f64 = init.iter().zip(&h).map(|(a, b)| a * b).sum();
            let second = collision_moment(chain, &pair, lattice.n, gamma, Some(mask), PAIR_STATE_CAP)?;
            let ratio = if mean > 0.0 {
                ((second - mean * mean) / (mean * mean)).max(0.0)
            } else {
                f64::INFINITY
            };
            Ok((mean, ratio))
        };
        let fail = |mean: f64, ratio: f64| {
            if mean > c_tilde {
                (ratio * mean * mean / ((mean - c_tilde) * (mean - c_tilde))).min(1.0)
            } else {
                1.0
            }
        };
        let (mean_up, ratio_up) = moments(&block.up)?;
        let mut miss = fail(mean_up, ratio_up);
        let (mean_down, ratio_down) = match &block.down {
            Some(mask) => {
                let (mu, r) = moments(mask)?;
                miss += fail(mu, r);
                (Some(mu), Some(r))
            }
            None => (None, None),
        };
        let successes = outcomes.iter().filter(|o| o[k]).count() as u64;
        let (ci_lo, ci_hi) = wilson_interval(successes, samples, z);
        sites.push(ConditionalSite {
            i: row,
            j,
            trials: samples,
            successes,
            frequency: successes as f64 / samples as f64,
            ci_lo,
            ci_hi,
            mean_up,
            ratio_up,
            mean_down,
            ratio_down,
            chebyshev_lower: (1.0 - miss).max(0.0),
        });
    }
    let max_ratio = sites
        .iter()
        .flat_map(|s| std::iter::once(s.ratio_up).chain(s.ratio_down))
        .fold(0.0, f64::max);
    Ok(ConditionalReport {
        row,
        beta,
        c_tilde,
        past_replica,
        samples,
        sites,
        max_ratio,
    })
}
