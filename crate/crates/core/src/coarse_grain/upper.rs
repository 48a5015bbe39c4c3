//! Fractional-moment contraction sum over a Vitali cover.
//!
//! For a center `y` the sum runs over centers `z` of
//! `max_{x in B(y, 5 n_w)} P_x[exp(-C4 beta delta #{l <= n: S_l in B(y, C2 n_w)}); S_n in B(z, 5 n_w)]^{1/2}`.
//! Far centers (ball distance at least `R n_w`) enter without the penalty.

use serde::Serialize;

use crate::environment::{c4_hat, DisorderSpec};
use crate::error::{Error, Result};
use crate::graph::{
    ball, distances_from, ensure_clear_of_boundary, vitali_cover, BallCover, Bfs, Dimensions, VertexId, VertexSet,
    WeightedGraph,
};
use crate::walk::LocalChain;

/// `delta_n = (C_V' n (C2 n_w)^{d_f})^{-1/2}`.
pub fn delta_n(n: usize, n_w: u32, c2: f64, c_v_prime: f64, d_f: f64) -> f64 {
    (c_v_prime * n as f64 * (c2 * n_w as f64).powf(d_f)).powf(-0.5)
}

/// `beta` solving `n = C1 beta^{-4/(2 - d_s)}`.
pub fn matched_beta(n: usize, c1: f64, d_s: f64) -> f64 {
    (c1 / n as f64).powf((2.0 - d_s) / 4.0)
}

/// Smallest `C_V'` with `#B(x, r) <= C_V' r^{d_f}` for the given radii.
pub fn fit_c_v_prime(g: &WeightedGraph, x: VertexId, radii: &[u32], d_f: f64) -> Result<f64> {
    let r_max = radii.iter().copied().max().unwrap_or(0);
    ensure_clear_of_boundary(g, x, r_max)?;
    let mut bfs = Bfs::new(g.vertex_count());
    let mut c: f64 = 0.0;
    for &r in radii.iter().filter(|r| **r > 0) {
        let k = bfs.run(g, &[x], r).len();
        c = c.max(k as f64 / (r as f64).powf(d_f));
    }
    Ok(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TiltMode {
    /// `delta_n` from the formula, which depends on `C2`.
    Derived,
    /// A fixed tilt, independent of `C2`.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FractionalMomentReport {
    pub n: usize,
    pub n_w: u32,
    pub beta: f64,
    pub delta: f64,
    pub c4_hat: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "R")]
    pub r_split: f64,
    pub tail: f64,
    pub core: f64,
    pub total: f64,
    /// Center attaining the supremum.
    pub worst_center: VertexId,
}

struct Target {
    /// `max(0, d(y, z) - 10 n_w)`
    ball_distance: u32,
    terminal: Vec<f64>,
    plain: f64,
}

struct CenterData {
    y: VertexId,
    chain: LocalChain,
    starts: Vec<usize>,
    targets: Vec<Target>,
}

/// Precomputed geometry for repeated contraction-sum evaluations at a fixed
/// block length `n`.
pub struct FractionalMomentSolver {
    n: usize,
    n_w: u32,
    dims: Dimensions,
    c_v_prime: f64,
    centers: Vec<CenterData>,
}

impl FractionalMomentSolver {
    /// Builds the cover of `B(origin, y_radius + n + 15 n_w)` and keeps the
    /// centers within `y_radius` of the origin as candidates for the sup.
    pub fn new(g: &WeightedGraph, n: usize, y_radius: u32, c_v_prime: f64) -> Result<Self> {
        let dims = g
            .nominal_dimensions()
            .ok_or_else(|| Error::Domain("graph family has no nominal dimensions".into()))?;
        let n_w = dims.block_radius(n);
        let region_radius = y_radius + n as u32 + 15 * n_w;
        ensure_clear_of_boundary(g, g.origin(), region_radius)?;
        let region = ball(g, g.origin(), region_radius);
        let cover = vitali_cover(g, &region, n_w)?;
        let from_origin = distances_from(g, g.origin());
        let ys: Vec<VertexId> = cover
            .centers
            .iter()
            .copied()
            .filter(|&c| from_origin[c as usize] <= y_radius)
            .collect();
        Self::with_cover(g, &cover, &ys, n, dims, c_v_prime)
    }

    /// Uses a given cover; `ys` must be centers of it whose neighbourhood of
    /// radius `n + 10 n_w` lies inside the covered region.
    pub fn with_cover(
        g: &WeightedGraph,
        cover: &BallCover,
        ys: &[VertexId],
        n: usize,
        dims: Dimensions,
        c_v_prime: f64,
    ) -> Result<Self> {
        let n_w = dims.block_radius(n);
        if cover.block_radius != n_w {
            return Err(Error::Domain(format!(
                "cover block radius {} does not match n_w = {n_w} at n = {n}",
                cover.block_radius
            )));
        }
        if ys.is_empty() {
            return Err(Error::Domain("no centers to evaluate".into()));
        }
        let reach = n as u32 + 10 * n_w;
        let mut is_center = vec![false; g.vertex_count()];
        for &c in &cover.centers {
            is_center[c as usize] = true;
        }
        let mut bfs = Bfs::new(g.vertex_count());
        let mut centers = Vec::with_capacity(ys.len());
        for &y in ys {
            if !is_center[y as usize] {
                return Err(Error::Domain(format!("vertex {y} is not a cover center")));
            }
            let order = bfs.run(g, &[y], reach).to_vec();
            let near: Vec<(VertexId, u32)> = order.iter().map(|&v| (v, bfs.dist(v).expect("visited"))).collect();
            if near.iter().any(|&(v, _)| cover.assignment[v as usize].is_none()) {
                return Err(Error::Domain(format!(
                    "center {y} is too close to the edge of the covered region"
                )));
            }
            let domain = ball(g, y, 5 * n_w + n as u32);
            let chain = LocalChain::new(g, &domain)?;
            let starts: Vec<usize> = ball(g, y, 5 * n_w)
                .iter()
                .map(|&v| chain.index_of(v).expect("start inside domain"))
                .collect();
            let mut targets = Vec::new();
            let mut zs: Vec<(VertexId, u32)> = near.into_iter().filter(|&(v, _)| is_center[v as usize]).collect();
            zs.sort_unstable();
            for (z, d) in zs {
                let zset = VertexSet::new(g.vertex_count(), ball(g, z, 5 * n_w));
                let terminal = chain.indicator(&zset);
                let h = chain.backward(n, &terminal, None);
                let plain = starts.iter().map(|&i| h[i]).fold(0.0, f64::max);
                targets.push(Target {
                    ball_distance: d.saturating_sub(10 * n_w),
                    terminal,
                    plain,
                });
            }
            centers.push(CenterData {
                y,
                chain,
                starts,
                targets,
            });
        }
        Ok(FractionalMomentSolver {
            n,
            n_w,
            dims,
            c_v_prime,
            centers,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_w(&self) -> u32 {
        self.n_w
    }

    pub fn center_count(&self) -> usize {
        self.centers.len()
    }

    /// Evaluates the tail and core parts at `beta` matched to `n` by `C1`.
    pub fn evaluate(
        &self,
        g: &WeightedGraph,
        spec: &DisorderSpec,
        c1: f64,
        c2: f64,
        r_split: f64,
        tilt: TiltMode,
    ) -> Result<FractionalMomentReport> {
        let beta = matched_beta(self.n, c1, self.dims.d_s());
        self.evaluate_at(g, spec, beta, c1, c2, r_split, tilt)
    }

    /// As [`evaluate`](Self::evaluate) with `beta` given directly.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate_at(
        &self,
        g: &WeightedGraph,
        spec: &DisorderSpec,
        beta: f64,
        c1: f64,
        c2: f64,
        r_split: f64,
        tilt: TiltMode,
    ) -> Result<FractionalMomentReport> {
        if !(c2 > 0.0) || !(r_split >= 0.0) || !(beta >= 0.0) {
            return Err(Error::Domain("C2 must be positive, R and beta nonnegative".into()));
        }
        let delta = match tilt {
            TiltMode::Derived => delta_n(self.n, self.n_w, c2, self.c_v_prime, self.dims.d_f),
            TiltMode::Fixed(d) => d,
        };
        let c4 = if beta > 0.0 { c4_hat(spec, beta, delta) } else { 0.0 };
        let rate = c4 * beta * delta;
        let split = r_split * self.n_w as f64;
        let penalty_radius = (c2 * self.n_w as f64).floor() as u32;
        let mut best: Option<(f64, f64, VertexId)> = None;
        for c in &self.centers {
            let pen_set = VertexSet::new(g.vertex_count(), ball(g, c.y, penalty_radius));
            let weight: Vec<f64> = c
                .chain
                .members()
                .iter()
                .map(|&v| if pen_set.contains(v) { (-rate).exp() } else { 1.0 })
                .collect();
            let mut tail = 0.0;
            let mut core = 0.0;
            for t in &c.targets {
                if t.ball_distance as f64 >= split {
                    tail += t.plain.sqrt();
                } else {
                    let h = c.chain.backward(self.n, &t.terminal, Some(&weight));
                    let m = c.starts.iter().map(|&i| h[i]).fold(0.0, f64::max);
                    core += m.sqrt();
                }
            }
            if best.is_none_or(|(bt, bc, _)| tail + core > bt + bc) {
                best = Some((tail, core, c.y));
            }
        }
        let (tail, core, worst_center) = best.expect("at least one center");
        Ok(FractionalMomentReport {
            n: self.n,
            n_w: self.n_w,
            beta,
            delta,
            c4_hat: c4,
            c1,
            c2,
            r_split,
            tail,
            core,
            total: tail + core,
            worst_center,
        })
    }

    /// Scans `C2` ascending, then `C1` ascending, then `R`; returns every
    /// evaluated report and the first with `total < threshold`.
    pub fn grid_search(
        &self,
        g: &WeightedGraph,
        spec: &DisorderSpec,
        c1s: &[f64],
        c2s: &[f64],
        rs: &[f64],
        threshold: f64,
    ) -> Result<(Vec<FractionalMomentReport>, Option<FractionalMomentReport>)> {
        let mut all = Vec::new();
        for &c2 in c2s {
            for &c1 in c1s {
                for &r in rs {
                    let rep = self.evaluate(g, spec, c1, c2, r, TiltMode::Derived)?;
                    all.push(rep);
                    if rep.total < threshold {
                        return Ok((all, Some(rep)));
                    }
                }
            }
        }
        Ok((all, None))
    }
}

/// One-shot evaluation of the contraction sum on a prebuilt cover.
#[allow(clippy::too_many_arguments)]
pub fn fractional_moment_sum(
    g: &WeightedGraph,
    cover: &BallCover,
    ys: &[VertexId],
    spec: &DisorderSpec,
    n: usize,
    c1: f64,
    c2: f64,
    r_split: f64,
    c_v_prime: f64,
) -> Result<FractionalMomentReport> {
    let dims = g
        .nominal_dimensions()
        .ok_or_else(|| Error::Domain("graph family has no nominal dimensions".into()))?;
    FractionalMomentSolver::with_cover(g, cover, ys, n, dims, c_v_prime)?.evaluate(
        g,
        spec,
        c1,
        c2,
        r_split,
        TiltMode::Derived,
    )
}
