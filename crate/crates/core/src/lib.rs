//! Directed polymers in random environment on strongly recurrent graphs.
//!
//! The crate builds the graphs (Sierpinski gasket, line), computes exact heat
//! kernels and quenched partition functions by dynamic programming, estimates
//! free energies and their gap, and runs the coarse-graining constructions
//! used to bound that gap from above and below.

pub mod coarse_grain;
pub mod environment;
pub mod error;
pub mod free_energy;
pub mod graph;
pub mod polymer;
pub mod report;
pub mod rng;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
