//! Brute-force reference computations shared by the integration tests.
#![allow(dead_code)]

use polyfract::environment::Environment;
use polyfract::graph::{VertexId, WeightedGraph};

/// All paths of `n` steps from `x`, with their probabilities.
pub fn paths(g: &WeightedGraph, x: VertexId, n: usize) -> Vec<(Vec<VertexId>, f64)> {
    let mut out = vec![(vec![x], 1.0)];
    for _ in 0..n {
        let mut next = Vec::with_capacity(out.len() * 4);
        for (p, w) in &out {
            let (ts, ps) = g.transitions(*p.last().unwrap());
            for (&y, &q) in ts.iter().zip(ps) {
                let mut np = p.clone();
                np.push(y);
                next.push((np, w * q));
            }
        }
        out = next;
    }
    out
}

/// `Z_n^x` by summing over every path.
pub fn brute_z<E: Environment>(g: &WeightedGraph, env: &E, x: VertexId, n: usize, beta: f64) -> f64 {
    paths(g, x, n)
        .iter()
        .map(|(p, w)| {
            let h: f64 = (1..=n).map(|i| env.value(i, p[i])).sum();
            w * (beta * h).exp()
        })
        .sum()
}

/// `sum_{pi, pi'} P(pi) P(pi') exp(gamma #{1 <= i <= n: pi_i = pi'_i})`.
pub fn brute_pair_moment(g: &WeightedGraph, x: VertexId, n: usize, gamma: f64) -> f64 {
    let ps = paths(g, x, n);
    let mut total = 0.0;
    for (a, wa) in &ps {
        for (b, wb) in &ps {
            let l = (1..=n).filter(|&i| a[i] == b[i]).count();
            total += wa * wb * (gamma * l as f64).exp();
        }
    }
    total
}

/// `p_n(x, y)` by path enumeration.
pub fn brute_kernel(g: &WeightedGraph, x: VertexId, n: usize) -> Vec<(VertexId, f64)> {
    let mut acc = std::collections::BTreeMap::new();
    for (p, w) in paths(g, x, n) {
        *acc.entry(*p.last().unwrap()).or_insert(0.0) += w;
    }
    acc.into_iter().collect()
}

/// Exact survival probability of oriented site percolation up to row
/// `horizon`, by evolving the law of the set of reachable open sites of
/// each row. Row `i` has `i / 2 + 1` sites; bit `k` of a state stands for
/// `J = i mod 2 + 2k`.
pub fn exact_survival(rho: f64, horizon: usize) -> f64 {
    use std::collections::BTreeMap;
    let mut law: BTreeMap<u64, f64> = BTreeMap::new();
    law.insert(1, rho);
    for i in 0..horizon {
        let width_next = i.div_ceil(2) + 1;
        let mut next: BTreeMap<u64, f64> = BTreeMap::new();
        for (&set, &p) in &law {
            let mut cand = 0u64;
            for k in 0..i / 2 + 1 {
                if set >> k & 1 == 1 {
                    let j = i % 2 + 2 * k;
                    for jn in [j.wrapping_sub(1), j + 1] {
                        if jn <= i + 1 {
                            let kn = (jn - (i + 1) % 2) / 2;
                            debug_assert!(kn < width_next);
                            cand |= 1 << kn;
                        }
                    }
                }
            }
            let c = cand.count_ones() as i32;
            // every subset b of cand
            let mut b = cand;
            loop {
                if b != 0 {
                    let k = b.count_ones() as i32;
                    *next.entry(b).or_insert(0.0) += p * rho.powi(k) * (1.0 - rho).powi(c - k);
                }
                if b == 0 {
                    break;
                }
                b = (b - 1) & cand;
            }
        }
        law = next;
    }
    law.values().sum()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
