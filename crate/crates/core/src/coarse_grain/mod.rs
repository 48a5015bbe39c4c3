//! Coarse-grained constructions behind the upper and lower bounds on the
//! free-energy gap.
//!
//! [`upper`] evaluates the fractional-moment contraction sum over a ball
//! cover; [`lattice`] assigns open/closed states to the coarse-grained
//! space-time lattice; [`percolation`] and [`domination`] check that those
//! states behave like a supercritical oriented percolation.

pub mod domination;
pub mod lattice;
pub mod percolation;
pub mod upper;

pub use domination::{
    constraint_feasibility, domination_check, domination_from_states, DominationOptions, DominationReport, Feasibility,
    PatternRow,
};
pub use lattice::{
    assign_site_states, build_cg_lattice, conditional_density_check, sample_site_states, tube_constant, CGLattice,
    ConditionalReport, ConditionalSite, RowEvaluation, SiteRecord, SiteStateField, StateBuilder,
};
pub use percolation::{
    lattice_sites, percolation_simulate, site_offset, survival_probability, survives, PercolationRun, SurvivalRow,
};
pub use upper::{delta_n, fractional_moment_sum, FractionalMomentReport, FractionalMomentSolver, TiltMode};
