use polyfract::coarse_grain::{
    assign_site_states, build_cg_lattice, conditional_density_check, domination_check, sample_site_states,
    tube_constant, DominationOptions,
};
use polyfract::environment::DisorderSpec;
use polyfract::graph::{build_line, build_sierpinski_gasket, geodesic_ray, WeightedGraph};
use polyfract::polymer::{restricted_partition, TubeConstraint};

fn check_telescoping(g: &WeightedGraph, n: usize, i_max: usize, beta: f64) {
    let ray = geodesic_ray(g, 100).unwrap();
    let lat = build_cg_lattice(g, &ray, n, 5.0, i_max).unwrap();
    let spec = DisorderSpec::gaussian(5);
    let lambda = spec.log_mgf(beta);
    let c_tilde = tube_constant(&lat) / 2.0;
    for replica in 0..3 {
        let env = spec.field(replica);
        let field = assign_site_states(&lat, &env, beta, lambda, c_tilde).unwrap();
        for rec in &field.records {
            if rec.starved {
                continue;
            }
            let telescoped = field.path_log_product(rec.i, rec.j).unwrap();
            assert!((telescoped - rec.log_w).abs() < 1e-10, "({}, {})", rec.i, rec.j);
            for dir in [1i32, -1] {
                let Some(ratio) = rec.log_ratio(dir) else { continue };
                let mut path = rec.path.clone();
                path.push((rec.j as i64 + dir as i64) as usize);
                let tube = TubeConstraint {
                    ray: lat.ray.clone(),
                    n,
                    n_w: lat.n_w,
                    c7: lat.c7,
                    path,
                };
                let direct = restricted_partition(g, &env, &tube, lat.start(), beta, lambda).unwrap();
                let last = *direct.last().unwrap();
                if last.is_finite() {
                    assert!(
                        (rec.log_w + ratio - last).abs() < 1e-10,
                        "({}, {}) dir {dir}",
                        rec.i,
                        rec.j
                    );
                } else {
                    assert_eq!(ratio, f64::NEG_INFINITY);
                }
            }
        }
    }
}

#[test]
fn ratios_telescope_on_the_line() {
    check_telescoping(&build_line(400).unwrap(), 16, 4, 0.7);
}

#[test]
fn ratios_telescope_on_the_gasket() {
    check_telescoping(&build_sierpinski_gasket(7).unwrap(), 16, 3, 0.7);
}

#[test]
fn zero_beta_states_are_deterministic() {
    let g = build_line(400).unwrap();
    let ray = geodesic_ray(&g, 200).unwrap();
    let lat = build_cg_lattice(&g, &ray, 16, 5.0, 3).unwrap();
    let c = tube_constant(&lat);
    let spec = DisorderSpec::gaussian(1);
    let xs = sample_site_states(&lat, &spec, 0.0, c / 2.0, 10).unwrap();
    assert!(xs.iter().all(|x| x == &xs[0]));
    assert!(xs[0].iter().all(|&b| b));
}

#[test]
fn conditional_ratios_shrink_with_beta() {
    let g = build_line(400).unwrap();
    let ray = geodesic_ray(&g, 200).unwrap();
    let lat = build_cg_lattice(&g, &ray, 16, 5.0, 3).unwrap();
    let c_tilde = tube_constant(&lat) / 2.0;
    let spec = DisorderSpec::gaussian(9);
    let lo = conditional_density_check(&lat, &spec, 0.05, c_tilde, 2, 0, 20).unwrap();
    let hi = conditional_density_check(&lat, &spec, 0.4, c_tilde, 2, 0, 20).unwrap();
    assert!(lo.max_ratio < hi.max_ratio);
    assert!(lo.max_ratio < 0.1);
    for s in &lo.sites {
        assert!(s.ci_lo <= s.frequency && s.frequency <= s.ci_hi);
        assert!((0.0..=1.0).contains(&s.chebyshev_lower));
    }
}

#[test]
fn domination_at_small_beta() {
    let g = build_line(400).unwrap();
    let ray = geodesic_ray(&g, 200).unwrap();
    let lat = build_cg_lattice(&g, &ray, 16, 5.0, 3).unwrap();
    let c_tilde = tube_constant(&lat) / 2.0;
    let spec = DisorderSpec::gaussian(2);
    let opts = DominationOptions {
        min_count: 20,
        ..Default::default()
    };
    let rep = domination_check(&lat, &spec, 0.02, c_tilde, 0.9, 0.9, 200, &opts).unwrap();
    assert_eq!(rep.samples, 200);
    assert!(rep.epsilon_hat < 0.05);
    assert_eq!(rep.violations, 0);
}

#[test]
fn blocks_disjoint_beyond_cutoff() {
    let g = build_sierpinski_gasket(7).unwrap();
    let ray = geodesic_ray(&g, 120).unwrap();
    let lat = build_cg_lattice(&g, &ray, 16, 5.0, 12).unwrap();
    let k = lat.disjointness_cutoff().expect("cutoff inside the lattice");
    for a in 0..=lat.i_max + 1 {
        for b in a + k..=lat.i_max + 1 {
            assert!(lat.outer(a).is_disjoint(lat.outer(b)));
        }
    }
    assert!(!lat.outer(0).is_disjoint(lat.outer(k - 1)));
}
