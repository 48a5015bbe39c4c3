//! Quenched partition functions by log-domain dynamic programming.

use std::collections::HashMap;

use serde::Serialize;

use crate::environment::{DisorderSpec, Environment};
use crate::error::{Error, Result};
use crate::graph::{ball, GeodesicRay, VertexId, VertexSet, WeightedGraph};
use crate::walk::{collision_moment, tube_balls, LocalChain, PAIR_STATE_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    /// Weights of `Z`.
    Raw,
    /// Weights of `W = Z exp(-n lambda(beta))`.
    Normalized,
}

/// `log w_n(y)`, the log weight of paths of length `n` ending at `y`.
#[derive(Clone, Debug)]
pub struct PolymerFront {
    time: usize,
    start: VertexId,
    beta: f64,
    lambda: f64,
    mode: Normalization,
    log_w: Vec<f64>,
    scratch: Vec<f64>,
    active: Vec<VertexId>,
    stamp: Vec<bool>,
}

impl PolymerFront {
    /// Unit mass at `x` at time 0. `lambda` is `lambda(beta)`, only used in
    /// normalized mode.
    pub fn new(g: &WeightedGraph, x: VertexId, beta: f64, lambda: f64, mode: Normalization) -> Self {
        Self::from_log_weights(g, &[(x, 0.0)], 0, x, beta, lambda, mode)
    }

    pub fn from_log_weights(
        g: &WeightedGraph,
        init: &[(VertexId, f64)],
        time: usize,
        start: VertexId,
        beta: f64,
        lambda: f64,
        mode: Normalization,
    ) -> Self {
        let nv = g.vertex_count();
        let mut log_w = vec![f64::NEG_INFINITY; nv];
        let mut active = Vec::with_capacity(init.len());
        for &(v, w) in init {
            if w > f64::NEG_INFINITY {
                log_w[v as usize] = w;
                active.push(v);
            }
        }
        active.sort_unstable();
        active.dedup();
        PolymerFront {
            time,
            start,
            beta,
            lambda,
            mode,
            log_w,
            scratch: vec![f64::NEG_INFINITY; nv],
            active,
            stamp: vec![false; nv],
        }
    }

    pub fn time(&self) -> usize {
        self.time
    }

    pub fn start(&self) -> VertexId {
        self.start
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mode(&self) -> Normalization {
        self.mode
    }

    /// Support in ascending order.
    pub fn support(&self) -> &[VertexId] {
        &self.active
    }

    pub fn log_weight(&self, v: VertexId) -> f64 {
        self.log_w[v as usize]
    }

    pub fn entries(&self) -> Vec<(VertexId, f64)> {
        self.active.iter().map(|&v| (v, self.log_w[v as usize])).collect()
    }

    /// `log sum_y w_n(y)`.
    pub fn log_total(&self) -> f64 {
        log_sum_exp_slice(self.active.iter().map(|&v| self.log_w[v as usize]))
    }

    /// One time step:
    /// `log w_{n+1}(y) = beta omega(n+1, y) [- lambda] + log sum_x w_n(x) p(x, y)`
    /// over `y` in `mask`.
    pub fn evolve<E: Environment + ?Sized>(
        &mut self,
        g: &WeightedGraph,
        env: &E,
        mask: Option<&VertexSet>,
    ) -> Result<()> {
        for &x in &self.active {
            if g.is_boundary(x) {
                return Err(Error::Boundary {
                    vertex: x,
                    step: self.time,
                });
            }
        }
        let mut next: Vec<VertexId> = Vec::with_capacity(self.active.len() + 8);
        for &x in &self.active {
            for &y in g.transitions(x).0 {
                if self.stamp[y as usize] {
                    continue;
                }
                if let Some(m) = mask {
                    if !m.contains(y) {
                        continue;
                    }
                }
                self.stamp[y as usize] = true;
                next.push(y);
            }
        }
        next.sort_unstable();
        let t = self.time + 1;
        let shift = match self.mode {
            Normalization::Raw => 0.0,
            Normalization::Normalized => self.lambda,
        };
        for &y in &next {
            self.stamp[y as usize] = false;
            let (us, lps) = g.incoming_log(y);
            let mut max = f64::NEG_INFINITY;
            for (&u, &lp) in us.iter().zip(lps) {
                let v = self.log_w[u as usize] + lp;
                if v > max {
                    max = v;
                }
            }
            let mut acc = 0.0;
            for (&u, &lp) in us.iter().zip(lps) {
                let v = self.log_w[u as usize] + lp;
                if v > f64::NEG_INFINITY {
                    acc += (v - max).exp();
                }
            }
            self.scratch[y as usize] = max + acc.ln() + self.beta * env.value(t, y) - shift;
        }
        for &x in &self.active {
            self.log_w[x as usize] = f64::NEG_INFINITY;
        }
        std::mem::swap(&mut self.log_w, &mut self.scratch);
        self.active = next;
        self.time = t;
        if self.active.is_empty() && mask.is_some() {
            return Err(Error::TubeStarvation { time: t });
        }
        debug_assert!(self.active.iter().all(|&v| self.log_w[v as usize].is_finite()));
        Ok(())
    }

    /// Rescales so that the weights sum to one; returns the removed log total.
    pub fn normalize(&mut self) -> f64 {
        let total = self.log_total();
        for &v in &self.active {
            self.log_w[v as usize] -= total;
        }
        total
    }
}

fn log_sum_exp_slice(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `log Z_n^x`.
pub fn partition_function<E: Environment + ?Sized>(
    g: &WeightedGraph,
    env: &E,
    x: VertexId,
    n: usize,
    beta: f64,
) -> Result<f64> {
    let mut front = PolymerFront::new(g, x, beta, 0.0, Normalization::Raw);
    for _ in 0..n {
        front.evolve(g, env, None)?;
    }
    Ok(front.log_total())
}

/// `(n, log Z_n, log W_n)` at each checkpoint, from one pass.
pub fn partition_trace<E: Environment + ?Sized>(
    g: &WeightedGraph,
    env: &E,
    x: VertexId,
    checkpoints: &[usize],
    beta: f64,
    lambda: f64,
) -> Result<Vec<(usize, f64, f64)>> {
    let last = checkpoints.iter().copied().max().unwrap_or(0);
    let mut front = PolymerFront::new(g, x, beta, 0.0, Normalization::Raw);
    let mut out = Vec::with_capacity(checkpoints.len());
    for t in 0..=last {
        if t > 0 {
            front.evolve(g, env, None)?;
        }
        if checkpoints.contains(&t) {
            let log_z = front.log_total();
            out.push((t, log_z, log_z - t as f64 * lambda));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointToPoint {
    /// `log Z_n^{x,y}`, `-inf` when `y` is unreachable in exactly `n` steps.
    pub log_z: f64,
    pub reachable: bool,
}

/// `log P_x[exp(beta H_n); S_n = y]`.
pub fn point_to_point<E: Environment + ?Sized>(
    g: &WeightedGraph,
    env: &E,
    x: VertexId,
    y: VertexId,
    n: usize,
    beta: f64,
) -> Result<PointToPoint> {
    let mut front = PolymerFront::new(g, x, beta, 0.0, Normalization::Raw);
    for _ in 0..n {
        front.evolve(g, env, None)?;
    }
    let log_z = front.log_weight(y);
    Ok(PointToPoint {
        log_z,
        reachable: log_z > f64::NEG_INFINITY,
    })
}

/// A path `gamma_0 = 0, gamma_1, ...` of ball indices along a ray, with the
/// block geometry that turns it into a tube of trajectories.
#[derive(Clone, Debug)]
pub struct TubeConstraint {
    pub ray: GeodesicRay,
    /// Block length.
    pub n: usize,
    pub n_w: u32,
    pub c7: f64,
    pub path: Vec<usize>,
}

impl TubeConstraint {
    pub fn validate(&self) -> Result<()> {
        if self.path.first() != Some(&0) {
            return Err(Error::Domain("tube path must start at ball 0".into()));
        }
        for w in self.path.windows(2) {
            if w[0].abs_diff(w[1]) != 1 {
                return Err(Error::Domain(format!(
                    "tube path steps must be +-1, got {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        if self.n == 0 || self.n_w == 0 {
            return Err(Error::Domain("block length and radius must be positive".into()));
        }
        Ok(())
    }
}

/// Inner and outer balls along a ray, built on demand.
pub struct BallCache<'g> {
    g: &'g WeightedGraph,
    ray: GeodesicRay,
    n_w: u32,
    c7: f64,
    balls: HashMap<usize, (VertexSet, VertexSet)>,
}

impl<'g> BallCache<'g> {
    pub fn new(g: &'g WeightedGraph, ray: GeodesicRay, n_w: u32, c7: f64) -> Self {
        BallCache {
            g,
            ray,
            n_w,
            c7,
            balls: HashMap::new(),
        }
    }

    pub fn get(&mut self, j: usize) -> Result<&(VertexSet, VertexSet)> {
        if !self.balls.contains_key(&j) {
            let pair = tube_balls(self.g, &self.ray, j, self.n_w, self.c7)?;
            self.balls.insert(j, pair);
        }
        Ok(&self.balls[&j])
    }

    pub fn inner(&mut self, j: usize) -> Result<&VertexSet> {
        Ok(&self.get(j)?.0)
    }

    pub fn outer(&mut self, j: usize) -> Result<&VertexSet> {
        Ok(&self.get(j)?.1)
    }
}

/// Advances a front by `n` steps inside `outer`, with the last step
/// confined to `endpoint`.
pub fn evolve_block<E: Environment + ?Sized>(
    g: &WeightedGraph,
    env: &E,
    front: &mut PolymerFront,
    outer: &VertexSet,
    endpoint: &VertexSet,
    n: usize,
) -> Result<()> {
    for k in 1..=n {
        let mask = if k == n { endpoint } else { outer };
        front.evolve(g, env, Some(mask))?;
    }
    Ok(())
}

/// `log W_{In}(Omega_I(Gamma))` for `I = 1..path.len()-1`: the normalized
/// weight of trajectories from `start` that sit in `B_{gamma_L}` at each
/// time `L n` and in `B~_{gamma_L}` strictly between `L n` and `(L+1) n`.
pub fn restricted_partition<E: Environment + ?Sized>(
    g: &WeightedGraph,
    env: &E,
    tube: &TubeConstraint,
    start: VertexId,
    beta: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    tube.validate()?;
    let mut balls = BallCache::new(g, tube.ray.clone(), tube.n_w, tube.c7);
    if !balls.inner(0)?.contains(start) {
        return Err(Error::Domain(format!("start vertex {start} is outside B_0")));
    }
    let mut front = PolymerFront::new(g, start, beta, lambda, Normalization::Normalized);
    let mut out = Vec::with_capacity(tube.path.len().saturating_sub(1));
    for w in tube.path.windows(2) {
        balls.get(w[1])?;
        let outer = balls.outer(w[0])?.clone();
        let endpoint = balls.inner(w[1])?;
        evolve_block(g, env, &mut front, &outer, endpoint, tube.n)?;
        out.push(front.log_total());
    }
    Ok(out)
}

/// `E^{x,x}[exp(gamma(beta) L_n(S, S'))]`, which equals `Q[(W_n^x)^2]`.
pub fn second_moment_pairwalk(g: &WeightedGraph, spec: &DisorderSpec, x: VertexId, n: usize, beta: f64) -> Result<f64> {
    second_moment_pairwalk_capped(g, spec, x, n, beta, PAIR_STATE_CAP)
}

pub fn second_moment_pairwalk_capped(
    g: &WeightedGraph,
    spec: &DisorderSpec,
    x: VertexId,
    n: usize,
    beta: f64,
    cap: u64,
) -> Result<f64> {
    let domain = ball(g, x, n as u32);
    let m = domain.len() as u64;
    if m * m > cap {
        return Err(Error::Size {
            what: "pair-walk states",
            requested: m * m,
            cap,
        });
    }
    let chain = LocalChain::new(g, &domain)?;
    let m = chain.len();
    let mut init = vec![0.0; m * m];
    let i = chain.index_of(x).expect("source in its ball");
    init[i * m + i] = 1.0;
    collision_moment(&chain, &init, n, spec.gamma(beta), None, cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_line, build_sierpinski_gasket, geodesic_ray};

    #[test]
    fn zero_beta_gives_unit_partition_function() {
        let g = build_sierpinski_gasket(4).unwrap();
        let f = DisorderSpec::gaussian(3).field(0);
        assert!(partition_function(&g, &f, g.origin(), 10, 0.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn one_step_line() {
        let g = build_line(4).unwrap();
        let f = DisorderSpec::gaussian(1).field(4);
        let beta = 0.8;
        let at = |v: i64| g.vertex_at(v, 0).unwrap();
        let want = (0.5 * (beta * f.value(1, at(-1))).exp() + 0.5 * (beta * f.value(1, at(1))).exp()).ln();
        let got = partition_function(&g, &f, g.origin(), 1, beta).unwrap();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn endpoint_decomposition() {
        let g = build_sierpinski_gasket(4).unwrap();
        let f = DisorderSpec::gaussian(1).field(0);
        let (n, beta) = (6, 0.7);
        let total = partition_function(&g, &f, g.origin(), n, beta).unwrap();
        let parts: Vec<f64> = (0..g.vertex_count() as VertexId)
            .map(|y| point_to_point(&g, &f, g.origin(), y, n, beta).unwrap().log_z)
            .collect();
        let sum: f64 = parts.iter().map(|v| v.exp()).sum();
        assert!((sum.ln() - total).abs() < 1e-12);
        let far = g.vertex_at(16, 0).unwrap();
        assert!(!point_to_point(&g, &f, g.origin(), far, n, beta).unwrap().reachable);
    }

    #[test]
    fn masked_front_starves() {
        let g = build_line(4).unwrap();
        let f = DisorderSpec::gaussian(1).field(0);
        let mut front = PolymerFront::new(&g, g.origin(), 1.0, 0.5, Normalization::Normalized);
        let mask = VertexSet::new(g.vertex_count(), [g.origin()]);
        assert!(matches!(
            front.evolve(&g, &f, Some(&mask)),
            Err(Error::TubeStarvation { time: 1 })
        ));
    }

    #[test]
    fn line_pair_moment_one_step() {
        let g = build_line(4).unwrap();
        let spec = DisorderSpec::gaussian(0);
        let beta: f64 = 0.6;
        let v = second_moment_pairwalk(&g, &spec, g.origin(), 1, beta).unwrap();
        assert!((v - (0.5 * spec.gamma(beta).exp() + 0.5)).abs() < 1e-14);
        assert_eq!(second_moment_pairwalk(&g, &spec, g.origin(), 3, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn tube_paths_are_validated() {
        let g = build_sierpinski_gasket(6).unwrap();
        let ray = geodesic_ray(&g, 30).unwrap();
        let mut tube = TubeConstraint {
            ray,
            n: 4,
            n_w: 1,
            c7: 5.0,
            path: vec![0, 2],
        };
        assert!(tube.validate().is_err());
        tube.path = vec![0, 1, 0, 1];
        assert!(tube.validate().is_ok());
    }
}
