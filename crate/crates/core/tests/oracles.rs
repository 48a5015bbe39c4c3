mod common;

use common::{brute_kernel, brute_pair_moment, brute_z, paths, rel_err};
use polyfract::environment::DisorderSpec;
use polyfract::graph::{build_line, build_sierpinski_gasket, geodesic_ray, VertexSet};
use polyfract::polymer::{partition_function, point_to_point, second_moment_pairwalk};
use polyfract::walk::{heat_kernel, tube_balls, tube_transition_prob, tube_transition_probs};

#[test]
fn partition_function_matches_enumeration() {
    let cases = [
        (build_line(10).unwrap(), 6usize),
        (build_sierpinski_gasket(2).unwrap(), 4),
    ];
    for (g, n_max) in &cases {
        for beta in [0.3, 1.0] {
            for r in 0..20 {
                let env = DisorderSpec::gaussian(77).field(r);
                for n in 1..=*n_max {
                    let dp = partition_function(g, &env, g.origin(), n, beta).unwrap();
                    let bf = brute_z(g, &env, g.origin(), n, beta).ln();
                    assert!(rel_err(dp, bf) < 1e-10 || (dp - bf).abs() < 1e-12, "n={n} {dp} {bf}");
                }
            }
        }
    }
}

#[test]
fn point_to_point_matches_enumeration() {
    let g = build_sierpinski_gasket(3).unwrap();
    let env = DisorderSpec::rademacher(3).field(1);
    let n = 4;
    let beta = 0.8;
    let ps = paths(&g, g.origin(), n);
    for y in 0..g.vertex_count() as u32 {
        let expect: f64 = ps
            .iter()
            .filter(|(p, _)| p[n] == y)
            .map(|(p, w)| w * (beta * (1..=n).map(|i| env.omega(i, p[i]).unwrap()).sum::<f64>()).exp())
            .sum();
        let got = point_to_point(&g, &env, g.origin(), y, n, beta).unwrap();
        if expect == 0.0 {
            assert!(!got.reachable);
        } else {
            assert!(rel_err(got.log_z.exp(), expect) < 1e-10);
        }
    }
}

#[test]
fn pair_walk_matches_pair_enumeration() {
    let cases = [
        (build_line(10).unwrap(), 4usize),
        (build_sierpinski_gasket(3).unwrap(), 4),
    ];
    for (g, n_max) in &cases {
        for spec in [DisorderSpec::gaussian(0), DisorderSpec::rademacher(0)] {
            for beta in [0.3, 0.5, 1.0] {
                for n in 1..=*n_max {
                    let dp = second_moment_pairwalk(g, &spec, g.origin(), n, beta).unwrap();
                    let bf = brute_pair_moment(g, g.origin(), n, spec.gamma(beta));
                    assert!(rel_err(dp, bf) < 1e-10, "n={n} beta={beta} {dp} {bf}");
                }
            }
        }
    }
}

#[test]
fn heat_kernel_matches_enumeration() {
    let g = build_sierpinski_gasket(4).unwrap();
    for n in 0..=7 {
        let hk = heat_kernel(&g, g.origin(), n).unwrap();
        let bf = brute_kernel(&g, g.origin(), n);
        assert_eq!(hk.probs.len(), bf.len());
        for ((a, pa), (b, pb)) in hk.probs.iter().zip(&bf) {
            assert_eq!(a, b);
            assert!((pa - pb).abs() < 1e-15);
        }
    }
}

#[test]
fn tube_probabilities_match_enumeration() {
    let g = build_sierpinski_gasket(6).unwrap();
    let n = 8;
    let c7 = 5.0;
    let ray = geodesic_ray(&g, 30).unwrap();
    let n_w = 2;
    let (inner, outer) = tube_balls(&g, &ray, 1, n_w, c7).unwrap();
    let (goal, _) = tube_balls(&g, &ray, 2, n_w, c7).unwrap();
    let brute = |x: u32, tube: &VertexSet| -> f64 {
        paths(&g, x, n)
            .iter()
            .filter(|(p, _)| p[1..].iter().all(|&v| tube.contains(v)) && goal.contains(p[n]))
            .map(|(_, w)| w)
            .sum()
    };
    let all = tube_transition_probs(&g, &ray, 1, n, n_w, c7, 1).unwrap();
    assert_eq!(all.len(), inner.len());
    for &(x, p) in &all {
        assert!((p - brute(x, &outer)).abs() < 1e-13);
    }
    // forward route at the block radius implied by n = 8
    let x = ray.at(2);
    let tp = tube_transition_prob(&g, x, &ray, 1, n, c7, 1).unwrap();
    assert!(tp.value <= tp.endpoint + 1e-15);
    assert!(tp.value >= tp.endpoint - tp.exit - 1e-12);
}
