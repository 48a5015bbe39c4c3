use polyfract::coarse_grain::upper::fit_c_v_prime;
use polyfract::coarse_grain::{
    assign_site_states, build_cg_lattice, conditional_density_check, survival_probability, tube_constant,
    FractionalMomentSolver,
};
use polyfract::free_energy::{estimate_free_energy, fit_exponent, gap_scan, replica_traces, GapScan, HorizonSchedule};
use polyfract::graph::{geodesic_ray, Dimensions, WeightedGraph};
use polyfract::report::{
    dimension_rows, fractional_moment_rows, scan_rows, scan_summary, site_state_rows, survival_rows, SeriesRow,
};
use polyfract::rng::derive_seed;
use polyfract::walk::{estimate_dimensions, log_spaced, return_profile, DimensionOptions};

use crate::config::{require, ExperimentConfig, PERCOLATION_STREAM};
use crate::output::Sink;
use crate::CliError;

fn dims(g: &WeightedGraph) -> Result<Dimensions, CliError> {
    g.nominal_dimensions()
        .ok_or_else(|| CliError::Config("this command needs a gasket or line graph".into()))
}

pub fn graph(cfg: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let g = cfg.build_graph()?;
    let report = g.check_invariants();
    let path = sink.text_after_first_line("graph.txt", &g.to_edge_list())?;
    sink.document("graph_report", &report)?;
    println!(
        "vertices={} edges={} written={}",
        report.vertices,
        report.edges,
        path.display()
    );
    Ok(())
}

pub fn heatkernel(cfg: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let g = cfg.build_graph()?;
    let n_max = require(&cfg.run.n_max, "run.n_max", "heatkernel")?;
    let x = cfg.run.source.unwrap_or(g.origin());
    let profile = return_profile(&g, x, n_max)?;
    let rows: Vec<SeriesRow> = profile.iter().map(|&(n, value)| SeriesRow { n, value }).collect();
    sink.table("return_profile", &rows)?;
    let fit = estimate_dimensions(&g, &DimensionOptions::new(n_max))?;
    sink.table("dimensions", &dimension_rows(&fit))?;
    println!("d_f={:.6} d_s={:.6} d_w={:.6}", fit.d_f_hat, fit.d_s_hat, fit.d_w_hat);
    Ok(())
}

pub fn freeenergy(cfg: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let g = cfg.build_graph()?;
    let spec = cfg.disorder()?;
    let beta = require(&cfg.run.beta, "run.beta", "freeenergy")?;
    let horizon = require(&cfg.run.horizon, "run.horizon", "freeenergy")?;
    let replicas = require(&cfg.run.replicas, "run.replicas", "freeenergy")?;
    let mut checkpoints = cfg.run.checkpoints.clone().unwrap_or_else(|| log_spaced(1, horizon, 2));
    if !checkpoints.contains(&horizon) {
        checkpoints.push(horizon);
    }
    checkpoints.sort_unstable();
    checkpoints.dedup();
    let traces = replica_traces(&g, &spec, beta, &checkpoints, replicas)?;
    sink.table("traces", &traces)?;
    let est = estimate_free_energy(&g, &spec, beta, horizon, replicas)?;
    sink.table("free_energy", &[est])?;
    println!(
        "beta={} n={} fq_hat={:.6} stderr={:.6} fa={:.6} gap={:.6}",
        est.beta, est.n, est.fq_hat, est.fq_stderr, est.fa, est.gap
    );
    Ok(())
}

pub fn gapscan(cfg: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let betas = require(&cfg.run.betas, "run.betas", "gapscan")?;
    let scan = match &cfg.run.synthetic {
        Some(syn) => {
            let ds = dims(&cfg.build_graph()?)?.d_s();
            GapScan::synthetic(cfg.graph.family.clone(), ds, &betas, syn.exponent, syn.prefactor)?
        }
        None => {
            let g = cfg.build_graph()?;
            let ds = dims(&g)?.d_s();
            let spec = cfg.disorder()?;
            let s = require(&cfg.run.schedule, "run.schedule", "gapscan")?;
            let schedule = HorizonSchedule {
                c1: s.c1,
                exponent: s.exponent.unwrap_or(4.0 / (2.0 - ds)),
                min_n: s.min_n,
            };
            let replicas = require(&cfg.run.replicas, "run.replicas", "gapscan")?;
            gap_scan(&g, &spec, &betas, &schedule, replicas, ds)?
        }
    };
    sink.table("scan", &scan_rows(&scan))?;
    let fit = fit_exponent(&scan)?;
    sink.document("scan_summary", &scan_summary(&scan, &fit))?;
    println!(
        "slope={:.3} ci=[{:.3}, {:.3}] theoretical={:.3}",
        fit.slope, fit.ci_lo, fit.ci_hi, scan.theoretical_exponent
    );
    Ok(())
}

pub fn cgupper(cfg: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let g = cfg.build_graph()?;
    let d = dims(&g)?;
    let spec = cfg.disorder()?;
    let cg = &cfg.coarse_grain;
    let n = require(&cg.n, "coarse_grain.n", "cgupper")?;
    let c1s = require(&cg.c1, "coarse_grain.c1", "cgupper")?;
    let c2s = require(&cg.c2, "coarse_grain.c2", "cgupper")?;
    let rs = require(&cg.r_split, "coarse_grain.r_split", "cgupper")?;
    let y_radius = cg.y_radius.unwrap_or(0);
    let n_w = d.block_radius(n);
    let c_v_prime = match cg.c_v_prime {
        Some(c) => c,
        None => {
            let c2_max = c2s.iter().cloned().fold(1.0, f64::max);
            let r_max = (c2_max * n_w as f64).ceil() as u32;
            let radii: Vec<u32> = (1..=r_max).collect();
            fit_c_v_prime(&g, g.origin(), &radii, d.d_f)?
        }
    };
    let solver = FractionalMomentSolver::new(&g, n, y_radius, c_v_prime)?;
    let (all, witness) = solver.grid_search(&g, &spec, &c1s, &c2s, &rs, cg.threshold.unwrap_or(0.5))?;
    sink.table("fractional_moment", &fractional_moment_rows(&all))?;
    match witness {
        Some(w) => println!(
            "witness C1={} C2={} R={} beta={:.6} total={:.6}",
            w.c1, w.c2, w.r_split, w.beta, w.total
        ),
        None => println!("no witness among {} grid points", all.len()),
    }
    Ok(())
}

pub fn cglower(cfg: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let g = cfg.build_graph()?;
    let d = dims(&g)?;
    let spec = cfg.disorder()?;
    let cg = &cfg.coarse_grain;
    let n = require(&cg.n, "coarse_grain.n", "cglower")?;
    let i_max = require(&cg.i_max, "coarse_grain.i_max", "cglower")?;
    let beta = require(&cg.beta, "coarse_grain.beta", "cglower")?;
    let c7 = cg.c7.unwrap_or(5.0);
    let n_w = d.block_radius(n) as usize;
    let len = (i_max + 1) * n_w + (c7 * n_w as f64).floor() as usize + 1;
    let ray = geodesic_ray(&g, len)?;
    let lattice = build_cg_lattice(&g, &ray, n, c7, i_max)?;
    let c = tube_constant(&lattice);
    let c_tilde = cg.c_tilde.unwrap_or(c / 2.0);
    let field = spec.field(cg.replica.unwrap_or(0));
    let states = assign_site_states(&lattice, &field, beta, spec.log_mgf(beta), c_tilde)?;
    sink.table("site_states", &site_state_rows(&states))?;
    if let Some(row) = cg.conditional_row {
        let samples = require(&cg.samples, "coarse_grain.samples", "cglower")?;
        let rep = conditional_density_check(&lattice, &spec, beta, c_tilde, row, cg.replica.unwrap_or(0), samples)?;
        sink.table("conditional", &rep.sites)?;
        println!("conditional row={} max_ratio={:.6e}", rep.row, rep.max_ratio);
    }
    let cutoff = lattice
        .disjointness_cutoff()
        .map_or("none".to_string(), |k| k.to_string());
    println!(
        "c={c:.6e} c_tilde={c_tilde:.6e} open={}/{} survives={} disjoint_cutoff={cutoff}",
        states.records.iter().filter(|r| r.open).count(),
        states.records.len(),
        states.survives()
    );
    Ok(())
}

pub fn percolation(cfg: &ExperimentConfig, sink: &Sink) -> Result<(), CliError> {
    let cg = &cfg.coarse_grain;
    let rho = require(&cg.rho, "coarse_grain.rho", "percolation")?;
    let horizon = require(&cg.horizon, "coarse_grain.horizon", "percolation")?;
    let runs = require(&cg.runs, "coarse_grain.runs", "percolation")?;
    let seed = derive_seed(cfg.seed(), PERCOLATION_STREAM);
    let rows = survival_probability(&rho, horizon, runs, seed)?;
    sink.table("survival", &survival_rows(&rows))?;
    for r in &rows {
        println!(
            "rho={} survival={:.6} ci=[{:.6}, {:.6}]",
            r.rho, r.survival, r.ci_lo, r.ci_hi
        );
    }
    Ok(())
}
