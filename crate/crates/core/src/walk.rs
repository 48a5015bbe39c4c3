//! Exact heat kernels, exit tails, dimension estimates and pair-walk
//! functionals of the simple random walk on a weighted graph.
//!
//! Everything here is computed by iterating the transition kernel on sparse
//! vectors. Values below `f64::MIN_POSITIVE` are flushed to zero so that the
//! support stays bounded; the flushed mass is far below any tolerance used
//! downstream.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{ball, Bfs, Dimensions, GeodesicRay, VertexId, VertexSet, WeightedGraph};
use crate::stats::{linear_fit, LinearFit};

/// Default cap on the number of pair states in [`collision_moment`].
pub const PAIR_STATE_CAP: u64 = 16 * 1024 * 1024;

/// Forward iteration of a probability vector under the transition kernel.
pub struct Propagator<'g> {
    g: &'g WeightedGraph,
    cur: Vec<f64>,
    nxt: Vec<f64>,
    active: Vec<VertexId>,
    next_active: Vec<VertexId>,
    in_next: Vec<bool>,
    time: usize,
}

impl<'g> Propagator<'g> {
    /// Point mass at `x` at time 0.
    pub fn new(g: &'g WeightedGraph, x: VertexId) -> Self {
        Self::from_distribution(g, &[(x, 1.0)])
    }

    pub fn from_distribution(g: &'g WeightedGraph, init: &[(VertexId, f64)]) -> Self {
        let n = g.vertex_count();
        let mut p = Propagator {
            g,
            cur: vec![0.0; n],
            nxt: vec![0.0; n],
            active: Vec::new(),
            next_active: Vec::new(),
            in_next: vec![false; n],
            time: 0,
        };
        for &(x, w) in init {
            if p.cur[x as usize] == 0.0 && w != 0.0 {
                p.active.push(x);
            }
            p.cur[x as usize] += w;
        }
        p
    }

    pub fn time(&self) -> usize {
        self.time
    }

    /// One step; mass stepping outside `mask` is killed.
    pub fn step(&mut self, mask: Option<&VertexSet>) -> Result<()> {
        let g = self.g;
        for &x in &self.active {
            if g.is_boundary(x) {
                return Err(Error::Boundary {
                    vertex: x,
                    step: self.time,
                });
            }
        }
        for &x in &self.active {
            let v = self.cur[x as usize];
            self.cur[x as usize] = 0.0;
            let (ts, ps) = g.transitions(x);
            for (&y, &p) in ts.iter().zip(ps) {
                if let Some(m) = mask {
                    if !m.contains(y) {
                        continue;
                    }
                }
                let yi = y as usize;
                if !self.in_next[yi] {
                    self.in_next[yi] = true;
                    self.next_active.push(y);
                }
                self.nxt[yi] += v * p;
            }
        }
        self.active.clear();
        for &y in &self.next_active {
            let yi = y as usize;
            self.in_next[yi] = false;
            if self.nxt[yi] >= f64::MIN_POSITIVE {
                self.active.push(y);
            } else {
                self.nxt[yi] = 0.0;
            }
        }
        self.next_active.clear();
        std::mem::swap(&mut self.cur, &mut self.nxt);
        self.time += 1;
        Ok(())
    }

    #[inline]
    pub fn value(&self, v: VertexId) -> f64 {
        self.cur[v as usize]
    }

    /// Vertices currently carrying mass, in no particular order.
    pub fn support(&self) -> &[VertexId] {
        &self.active
    }

    pub fn mass(&self) -> f64 {
        self.active.iter().map(|&v| self.cur[v as usize]).sum()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.active.iter().map(|&v| self.cur[v as usize].powi(2)).sum()
    }

    /// Current vector as `(vertex, mass)` pairs in ascending vertex order.
    pub fn entries(&self) -> Vec<(VertexId, f64)> {
        let mut e: Vec<(VertexId, f64)> = self.active.iter().map(|&v| (v, self.cur[v as usize])).collect();
        e.sort_unstable_by_key(|&(v, _)| v);
        e
    }
}

/// Distribution of `S_n` under `P^x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeatKernelSlice {
    pub time: usize,
    pub source: VertexId,
    /// `(y, p_n(x, y))` for every `y` with nonzero probability, ascending.
    pub probs: Vec<(VertexId, f64)>,
}

impl HeatKernelSlice {
    pub fn prob(&self, y: VertexId) -> f64 {
        match self.probs.binary_search_by_key(&y, |&(v, _)| v) {
            Ok(i) => self.probs[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().map(|&(_, p)| p).sum()
    }
}

pub fn heat_kernel(g: &WeightedGraph, x: VertexId, n: usize) -> Result<HeatKernelSlice> {
    let mut prop = Propagator::new(g, x);
    for _ in 0..n {
        prop.step(None)?;
        debug_assert!((prop.mass() - 1.0).abs() < 1e-12);
    }
    Ok(HeatKernelSlice {
        time: n,
        source: x,
        probs: prop.entries(),
    })
}

/// On-diagonal probability and collision sum at one time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelStats {
    pub n: usize,
    /// `p_n(x, x)`
    pub return_prob: f64,
    /// `sum_y p_n(x, y)^2`
    pub collision: f64,
}

/// [`KernelStats`] for `n = 0..=n_max` from a single forward pass.
pub fn kernel_stats(g: &WeightedGraph, x: VertexId, n_max: usize) -> Result<Vec<KernelStats>> {
    let mut prop = Propagator::new(g, x);
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        if n > 0 {
            prop.step(None)?;
        }
        out.push(KernelStats {
            n,
            return_prob: prop.value(x),
            collision: prop.sum_of_squares(),
        });
    }
    Ok(out)
}

/// `(n, p_n(x,x) + p_{n+1}(x,x))` for `n = 0..=n_max`.
pub fn return_profile(g: &WeightedGraph, x: VertexId, n_max: usize) -> Result<Vec<(usize, f64)>> {
    let stats = kernel_stats(g, x, n_max + 1)?;
    Ok(stats
        .windows(2)
        .map(|w| (w[0].n, w[0].return_prob + w[1].return_prob))
        .collect())
}

/// `sum_{i=1}^n sum_y p_i(x, y)^2`.
pub fn pair_overlap_sum(g: &WeightedGraph, x: VertexId, n: usize) -> Result<f64> {
    Ok(kernel_stats(g, x, n)?.iter().skip(1).map(|s| s.collision).sum())
}

/// Cumulative overlap sums `(n, sum_{i=1}^n sum_y p_i(x,y)^2)` for `n = 1..=n_max`.
pub fn pair_overlap_profile(g: &WeightedGraph, x: VertexId, n_max: usize) -> Result<Vec<(usize, f64)>> {
    let stats = kernel_stats(g, x, n_max)?;
    let mut acc = 0.0;
    Ok(stats
        .iter()
        .skip(1)
        .map(|s| {
            acc += s.collision;
            (s.n, acc)
        })
        .collect())
}

/// Integers `round(lo * 2^{k/per_octave})` inside `[lo, hi]`, deduplicated.
pub fn log_spaced(lo: usize, hi: usize, per_octave: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    if lo == 0 || hi < lo {
        return out;
    }
    let mut k = 0;
    loop {
        let v = (lo as f64 * 2f64.powf(k as f64 / per_octave as f64)).round() as usize;
        if v > hi {
            break;
        }
        if out.last() != Some(&v) {
            out.push(v);
        }
        k += 1;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DimensionOptions {
    /// Largest time of the return-probability profile.
    pub n_max: usize,
    /// Largest radius of the volume profile; `n_max` when absent.
    pub volume_radius: Option<u32>,
    /// Smallest time or radius used in a fit.
    pub window_lo: f64,
    /// Fraction of the range dropped at the top.
    pub trim: f64,
    /// Sample density of the log-spaced fit points.
    pub per_octave: usize,
}

impl DimensionOptions {
    pub fn new(n_max: usize) -> Self {
        DimensionOptions {
            n_max,
            volume_radius: None,
            window_lo: 16.0,
            trim: 0.1,
            per_octave: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DimensionFit {
    pub d_f_hat: f64,
    pub d_w_hat: f64,
    pub d_s_hat: f64,
    pub volume_fit: LinearFit,
    pub return_fit: LinearFit,
}

impl DimensionFit {
    pub fn strongly_recurrent(&self) -> bool {
        self.d_s_hat < 2.0
    }
}

fn windowed_fit(points: &[(usize, f64)], lo: f64, hi: f64, per_octave: usize) -> Result<LinearFit> {
    let hi_i = hi.floor() as usize;
    let lo_i = lo.ceil().max(1.0) as usize;
    let keep = log_spaced(lo_i, hi_i, per_octave);
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|(n, v)| *v > 0.0 && keep.binary_search(n).is_ok())
        .map(|&(n, v)| ((n as f64).ln(), v.ln()))
        .unzip();
    if xs.len() < 4 {
        return Err(Error::Regression(format!(
            "{} usable points in window [{lo}, {hi}], need at least 4",
            xs.len()
        )));
    }
    linear_fit(&xs, &ys)
}

/// `d_f` from ball cardinalities, `d_s` from the two-step return profile
/// and `d_w = 2 d_f / d_s`.
pub fn estimate_dimensions(g: &WeightedGraph, opts: &DimensionOptions) -> Result<DimensionFit> {
    let x = g.origin();
    let radius = opts.volume_radius.unwrap_or(opts.n_max as u32);
    let volume = crate::graph::volume_growth(g, x, radius)?;
    let vol_pts: Vec<(usize, f64)> = volume.iter().map(|p| (p.radius as usize, p.count as f64)).collect();
    let volume_fit = windowed_fit(
        &vol_pts,
        opts.window_lo,
        radius as f64 * (1.0 - opts.trim),
        opts.per_octave,
    )?;
    let profile = return_profile(g, x, opts.n_max)?;
    let return_fit = windowed_fit(
        &profile,
        opts.window_lo,
        opts.n_max as f64 * (1.0 - opts.trim),
        opts.per_octave,
    )?;
    let d_f_hat = volume_fit.slope;
    let d_s_hat = -2.0 * return_fit.slope;
    Ok(DimensionFit {
        d_f_hat,
        d_w_hat: 2.0 * d_f_hat / d_s_hat,
        d_s_hat,
        volume_fit,
        return_fit,
    })
}

/// `(t, P_x(tau(x, 2 t n^{1/d_w}) < n))` for each `t`, where `tau(x, r)` is
/// the first time the walk leaves `B(x, r)`.
pub fn exit_tail(g: &WeightedGraph, x: VertexId, n: usize, t_grid: &[f64], d_w: f64) -> Result<Vec<(f64, f64)>> {
    let scale = (n as f64).powf(1.0 / d_w);
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if !(t >= 1.0) {
            return Err(Error::Domain(format!("exit tail needs t >= 1, got {t}")));
        }
        let r = (2.0 * t * scale).floor() as u32;
        out.push((t, exit_probability(g, x, r, n)?));
    }
    Ok(out)
}

/// `P_x(S_k` leaves `B(x, r)` for some `k < n)`.
pub fn exit_probability(g: &WeightedGraph, x: VertexId, r: u32, n: usize) -> Result<f64> {
    if n == 0 || r as usize >= n - 1 {
        return Ok(0.0);
    }
    let inside = VertexSet::new(g.vertex_count(), ball(g, x, r));
    let mut prop = Propagator::new(g, x);
    for _ in 0..n - 1 {
        prop.step(Some(&inside))?;
    }
    Ok((1.0 - prop.mass()).max(0.0))
}

/// Fits `log P = log c5 - c6 t^{d_w/(d_w-1)}` to the positive tail values.
/// Returns `(c5, c6, residual_rms)`.
pub fn fit_exit_decay(tail: &[(f64, f64)], d_w: f64) -> Result<(f64, f64, f64)> {
    let e = d_w / (d_w - 1.0);
    let (xs, ys): (Vec<f64>, Vec<f64>) = tail
        .iter()
        .filter(|(_, p)| *p > 0.0)
        .map(|&(t, p)| (t.powf(e), p.ln()))
        .unzip();
    let fit = linear_fit(&xs, &ys)?;
    Ok((fit.intercept.exp(), -fit.slope, fit.residual_rms))
}

/// Fitted constants of the sub-Gaussian envelopes
/// `c1 n^{-d_f/d_w} exp(-c2 u)` above `p_n(x,y)` and
/// `c3 n^{-d_f/d_w} exp(-c4 u)` below `p_n(x,y) + p_{n+1}(x,y)`,
/// with `u = (d(x,y)^{d_w}/n)^{1/(d_w-1)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnvelopeFit {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub samples: usize,
}

/// One heat-kernel observation for [`fit_envelopes`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSample {
    pub n: usize,
    pub distance: u32,
    pub p: f64,
    pub p_two_step: f64,
}

/// Samples `p_n(x, y)` over all `y` in the support, for every source and time.
pub fn kernel_samples(g: &WeightedGraph, sources: &[VertexId], times: &[usize]) -> Result<Vec<KernelSample>> {
    let mut out = Vec::new();
    let t_max = times.iter().copied().max().unwrap_or(0);
    let mut bfs = Bfs::new(g.vertex_count());
    for &x in sources {
        bfs.run(g, &[x], t_max as u32 + 1);
        let mut prop = Propagator::new(g, x);
        let mut prev: Option<Vec<(VertexId, f64)>> = None;
        for step in 0..=t_max + 1 {
            if step > 0 {
                prop.step(None)?;
            }
            let cur = prop.entries();
            if let Some(p) = prev {
                let n = step - 1;
                if times.contains(&n) {
                    let next: std::collections::HashMap<VertexId, f64> = cur.iter().copied().collect();
                    for &(y, py) in &p {
                        out.push(KernelSample {
                            n,
                            distance: bfs.dist(y).expect("support within reach"),
                            p: py,
                            p_two_step: py + next.get(&y).copied().unwrap_or(0.0),
                        });
                    }
                }
            }
            prev = Some(cur);
        }
    }
    Ok(out)
}

/// Decay rates come from a least-squares fit of the log of the rescaled
/// kernel against `u`; the prefactors are then the tightest values making
/// the envelopes hold on every sample with `d(x,y) <= n`.
pub fn fit_envelopes(samples: &[KernelSample], dims: Dimensions) -> Result<EnvelopeFit> {
    let (d_f, d_w) = (dims.d_f, dims.d_w);
    let prep: Vec<(f64, f64, f64)> = samples
        .iter()
        .filter(|s| s.n > 0 && s.distance as usize <= s.n)
        .map(|s| {
            let n = s.n as f64;
            let u = ((s.distance as f64).powf(d_w) / n).powf(1.0 / (d_w - 1.0));
            let scale = n.powf(d_f / d_w);
            (u, s.p * scale, s.p_two_step * scale)
        })
        .collect();
    let (xs, ys): (Vec<f64>, Vec<f64>) = prep
        .iter()
        .filter(|(_, q, _)| *q > 0.0)
        .map(|&(u, q, _)| (u, q.ln()))
        .unzip();
    let c2 = (-linear_fit(&xs, &ys)?.slope).max(0.0);
    let c4 = c2;
    let c1 = prep
        .iter()
        .filter(|(_, q, _)| *q > 0.0)
        .map(|&(u, q, _)| q * (c2 * u).exp())
        .fold(0.0, f64::max);
    // the lower envelope needs a faster decay rate to stay under the far tail
    let (xs2, ys2): (Vec<f64>, Vec<f64>) = prep
        .iter()
        .filter(|(_, _, q)| *q > 0.0)
        .map(|&(u, _, q)| (u, q.ln()))
        .unzip();
    let c4 = c4.max(-linear_fit(&xs2, &ys2)?.slope);
    let c3 = prep
        .iter()
        .map(|&(u, _, q)| q * (c4 * u).exp())
        .fold(f64::INFINITY, f64::min);
    Ok(EnvelopeFit {
        c1,
        c2,
        c3,
        c4,
        samples: prep.len(),
    })
}

/// Transition kernel restricted to a vertex subset; mass leaving the subset
/// is killed.
#[derive(Clone, Debug)]
pub struct LocalChain {
    members: Vec<VertexId>,
    local: std::collections::HashMap<VertexId, u32>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
    probs: Vec<f64>,
}

impl LocalChain {
    /// Errors if the subset contains a frontier vertex.
    pub fn new(g: &WeightedGraph, domain: &[VertexId]) -> Result<Self> {
        let mut members = domain.to_vec();
        members.sort_unstable();
        members.dedup();
        let local: std::collections::HashMap<VertexId, u32> =
            members.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
        let mut offsets = Vec::with_capacity(members.len() + 1);
        let mut targets = Vec::new();
        let mut probs = Vec::new();
        offsets.push(0);
        for &v in &members {
            if g.is_boundary(v) {
                return Err(Error::Boundary { vertex: v, step: 0 });
            }
            let (ts, ps) = g.transitions(v);
            for (&y, &p) in ts.iter().zip(ps) {
                if let Some(&j) = local.get(&y) {
                    targets.push(j);
                    probs.push(p);
                }
            }
            offsets.push(targets.len());
        }
        Ok(LocalChain {
            members,
            local,
            offsets,
            targets,
            probs,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn members(&self) -> &[VertexId] {
        &self.members
    }

    pub fn index_of(&self, v: VertexId) -> Option<usize> {
        self.local.get(&v).map(|&i| i as usize)
    }

    /// Indicator vector of `set` in local coordinates.
    pub fn indicator(&self, set: &VertexSet) -> Vec<f64> {
        self.members
            .iter()
            .map(|&v| if set.contains(v) { 1.0 } else { 0.0 })
            .collect()
    }

    /// `h_k(i) = sum_j P(i, j) w(j) h_{k-1}(j)` from `h_0 = terminal`;
    /// returns `h_steps`, i.e. `E_i[prod_{l=1}^{steps} w(S_l) terminal(S_steps)]`
    /// with the walk killed on leaving the subset.
    pub fn backward(&self, steps: usize, terminal: &[f64], weight: Option<&[f64]>) -> Vec<f64> {
        let m = self.len();
        let mut h = terminal.to_vec();
        let mut next = vec![0.0; m];
        let mut wh = vec![0.0; m];
        for _ in 0..steps {
            match weight {
                Some(w) => {
                    for j in 0..m {
                        wh[j] = w[j] * h[j];
                    }
                }
                None => wh.copy_from_slice(&h),
            }
            for i in 0..m {
                let mut acc = 0.0;
                for e in self.offsets[i]..self.offsets[i + 1] {
                    acc += self.probs[e] * wh[self.targets[e] as usize];
                }
                next[i] = acc;
            }
            std::mem::swap(&mut h, &mut next);
        }
        h
    }

    /// `out(j) = sum_i f(i) P(i, j)`.
    pub fn forward_step(&self, f: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, &fi) in f.iter().enumerate() {
            if fi == 0.0 {
                continue;
            }
            for e in self.offsets[i]..self.offsets[i + 1] {
                out[self.targets[e] as usize] += fi * self.probs[e];
            }
        }
    }

    /// Forward iteration of a local measure, weighting arrivals by `weight`.
    pub fn forward(&self, steps: usize, init: &[f64], weight: Option<&[f64]>) -> Vec<f64> {
        let m = self.len();
        let mut f = init.to_vec();
        let mut next = vec![0.0; m];
        for _ in 0..steps {
            self.forward_step(&f, &mut next);
            if let Some(w) = weight {
                for j in 0..m {
                    next[j] *= w[j];
                }
            }
            std::mem::swap(&mut f, &mut next);
        }
        f
    }
}

/// `E[exp(gamma L_n(S, S')); S_n, S'_n in terminal]` for two independent
/// walks on a [`LocalChain`] started from the product-form or general
/// initial law `init` (row-major, `m x m`), where `L_n` counts the times
/// `1..=n` at which the walks coincide. `terminal = None` means no endpoint
/// constraint.
pub fn collision_moment(
    chain: &LocalChain,
    init: &[f64],
    steps: usize,
    gamma: f64,
    terminal: Option<&[f64]>,
    cap: u64,
) -> Result<f64> {
    let m = chain.len();
    let states = (m as u64) * (m as u64);
    if states > cap {
        return Err(Error::Size {
            what: "pair-walk states",
            requested: states,
            cap,
        });
    }
    assert_eq!(init.len(), m * m);
    let boost = gamma.exp();
    let mut cur = init.to_vec();
    let mut tmp = vec![0.0; m * m];
    let mut log_scale = 0.0;
    for _ in 0..steps {
        // tmp = cur * P  (second walk)
        tmp.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..m {
            let row = &cur[i * m..(i + 1) * m];
            let out = &mut tmp[i * m..(i + 1) * m];
            for (l, &c) in row.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                for e in chain.offsets[l]..chain.offsets[l + 1] {
                    out[chain.targets[e] as usize] += c * chain.probs[e];
                }
            }
        }
        // cur = P^T * tmp  (first walk)
        cur.iter_mut().for_each(|v| *v = 0.0);
        for l in 0..m {
            let src = l * m;
            for e in chain.offsets[l]..chain.offsets[l + 1] {
                let i = chain.targets[e] as usize;
                let p = chain.probs[e];
                let a = &mut cur[i * m..(i + 1) * m];
                for (o, &t) in a.iter_mut().zip(&tmp[src..src + m]) {
                    *o += p * t;
                }
            }
        }
        for i in 0..m {
            cur[i * m + i] *= boost;
        }
        let max = cur.iter().cloned().fold(0.0, f64::max);
        if max > 1e150 {
            cur.iter_mut().for_each(|v| *v /= max);
            log_scale += max.ln();
        }
    }
    let total: f64 = match terminal {
        None => cur.iter().sum(),
        Some(t) => {
            let mut s = 0.0;
            for i in 0..m {
                if t[i] == 0.0 {
                    continue;
                }
                for j in 0..m {
                    s += t[i] * t[j] * cur[i * m + j];
                }
            }
            s
        }
    };
    Ok(total * log_scale.exp())
}

/// Inner and outer balls `B_J = B(x_{J n_w}, n_w)` and
/// `B~_J = B(x_{J n_w}, floor(C7 n_w))` along a ray.
pub fn tube_balls(g: &WeightedGraph, ray: &GeodesicRay, j: usize, n_w: u32, c7: f64) -> Result<(VertexSet, VertexSet)> {
    let k = j * n_w as usize;
    if k >= ray.len() {
        return Err(Error::Domain(format!("ray too short for ball index {j}")));
    }
    let c = ray.at(k);
    let outer_r = (c7 * n_w as f64).floor() as u32;
    let inner = VertexSet::new(g.vertex_count(), ball(g, c, n_w));
    let outer = VertexSet::new(g.vertex_count(), ball(g, c, outer_r));
    Ok((inner, outer))
}

/// Block radius `n_w` for time `n` from the graph family's walk dimension.
pub fn block_radius_for(g: &WeightedGraph, n: usize) -> Result<u32> {
    g.nominal_dimensions()
        .map(|d| d.block_radius(n))
        .ok_or_else(|| Error::Domain("graph family has no nominal walk dimension".into()))
}

fn neighbor_index(j: usize, direction: i32) -> Result<usize> {
    match direction {
        1 => Ok(j + 1),
        -1 if j > 0 => Ok(j - 1),
        -1 => Err(Error::Domain("J - 1 is undefined at J = 0".into())),
        d => Err(Error::Domain(format!("direction must be +1 or -1, got {d}"))),
    }
}

/// The tube probability with the two terms of its lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TubeProbability {
    /// `P_x(S_i in B~_J, i = 1..n; S_n in B_{J+-1})`
    pub value: f64,
    /// `P_x(S_n in B_{J+-1})`
    pub endpoint: f64,
    /// `P_x(S_i not in B~_J for some i = 1..n)`
    pub exit: f64,
}

pub fn tube_transition_prob(
    g: &WeightedGraph,
    x: VertexId,
    ray: &GeodesicRay,
    j: usize,
    n: usize,
    c7: f64,
    direction: i32,
) -> Result<TubeProbability> {
    let n_w = block_radius_for(g, n)?;
    let target = neighbor_index(j, direction)?;
    let (_, outer) = tube_balls(g, ray, j, n_w, c7)?;
    if !outer.contains(x) {
        return Err(Error::Domain(format!("start vertex {x} is outside the tube")));
    }
    let (goal, _) = tube_balls(g, ray, target, n_w, c7)?;

    let mut free = Propagator::new(g, x);
    let mut tube = Propagator::new(g, x);
    for _ in 0..n {
        free.step(None)?;
        tube.step(Some(&outer))?;
    }
    let endpoint: f64 = goal.members().iter().map(|&v| free.value(v)).sum();
    let value: f64 = goal.members().iter().map(|&v| tube.value(v)).sum();
    Ok(TubeProbability {
        value,
        endpoint,
        exit: (1.0 - tube.mass()).max(0.0),
    })
}

/// Tube probabilities for every start in `B_J`, by one backward pass.
pub fn tube_transition_probs(
    g: &WeightedGraph,
    ray: &GeodesicRay,
    j: usize,
    n: usize,
    n_w: u32,
    c7: f64,
    direction: i32,
) -> Result<Vec<(VertexId, f64)>> {
    let target = neighbor_index(j, direction)?;
    let (inner, outer) = tube_balls(g, ray, j, n_w, c7)?;
    let (goal, _) = tube_balls(g, ray, target, n_w, c7)?;
    let chain = LocalChain::new(g, outer.members())?;
    let h = chain.backward(n, &chain.indicator(&goal), None);
    Ok(inner
        .members()
        .iter()
        .map(|&v| (v, h[chain.index_of(v).expect("inner ball inside tube")]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_line, build_sierpinski_gasket, geodesic_ray};

    #[test]
    fn one_step_on_the_line() {
        let g = build_line(4).unwrap();
        let s = heat_kernel(&g, g.origin(), 1).unwrap();
        let at = |v: i64| g.vertex_at(v, 0).unwrap();
        assert_eq!(s.probs, vec![(at(-1), 0.5), (at(1), 0.5)]);
        let s0 = heat_kernel(&g, at(2), 0).unwrap();
        assert_eq!(s0.probs, vec![(at(2), 1.0)]);
    }

    #[test]
    fn gasket_two_step_return() {
        let g = build_sierpinski_gasket(3).unwrap();
        let s = heat_kernel(&g, g.origin(), 2).unwrap();
        assert!((s.prob(g.origin()) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn line_return_profile() {
        let g = build_line(8).unwrap();
        let p = return_profile(&g, g.origin(), 3).unwrap();
        assert_eq!(p[2], (2, 0.5));
        assert!(p.iter().all(|&(_, v)| v > 0.0 && v <= 1.0));
    }

    #[test]
    fn overlap_sums() {
        let g = build_line(8).unwrap();
        assert_eq!(pair_overlap_sum(&g, g.origin(), 0).unwrap(), 0.0);
        assert_eq!(pair_overlap_sum(&g, g.origin(), 1).unwrap(), 0.5);
    }

    #[test]
    fn boundary_contamination_is_reported() {
        let g = build_line(3).unwrap();
        assert!(heat_kernel(&g, g.origin(), 3).is_ok());
        assert!(matches!(heat_kernel(&g, g.origin(), 4), Err(Error::Boundary { .. })));
    }

    #[test]
    fn exit_tail_is_zero_beyond_reach() {
        let g = build_line(40).unwrap();
        let t = exit_tail(&g, g.origin(), 16, &[1.0, 2.0, 5.0], 2.0).unwrap();
        assert_eq!(t[2].1, 0.0);
        assert!(t[0].1 >= t[1].1 && t[1].1 >= t[2].1);
    }

    #[test]
    fn log_spacing() {
        assert_eq!(log_spaced(1, 8, 1), vec![1, 2, 4, 8]);
        assert!(log_spaced(16, 4096, 8).windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn tube_forward_and_backward_agree() {
        let g = build_sierpinski_gasket(7).unwrap();
        let ray = geodesic_ray(&g, 40).unwrap();
        let n = 16;
        let n_w = block_radius_for(&g, n).unwrap();
        let all = tube_transition_probs(&g, &ray, 1, n, n_w, 5.0, 1).unwrap();
        for &(x, v) in all.iter().take(5) {
            let t = tube_transition_prob(&g, x, &ray, 1, n, 5.0, 1).unwrap();
            assert!((t.value - v).abs() < 1e-13);
            assert!(t.value >= t.endpoint - t.exit - 1e-15);
            assert!((0.0..=1.0).contains(&t.value));
        }
        assert!(tube_transition_prob(&g, g.origin(), &ray, 0, n, 5.0, -1).is_err());
    }

    #[test]
    fn collision_moment_one_step_line() {
        let g = build_line(3).unwrap();
        let chain = LocalChain::new(&g, &ball(&g, g.origin(), 1)).unwrap();
        let m = chain.len();
        let mut init = vec![0.0; m * m];
        let o = chain.index_of(g.origin()).unwrap();
        init[o * m + o] = 1.0;
        let gamma: f64 = 0.7;
        let v = collision_moment(&chain, &init, 1, gamma, None, PAIR_STATE_CAP).unwrap();
        assert!((v - (0.5 * gamma.exp() + 0.5)).abs() < 1e-15);
        assert!(matches!(
            collision_moment(&chain, &init, 1, gamma, None, 4),
            Err(Error::Size { .. })
        ));
    }
}
