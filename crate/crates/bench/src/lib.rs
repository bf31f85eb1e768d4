//! Fixed workloads shared by the benchmarks.

use rds_core::fluid::{solve_fluid, FluidParams, FluidSolution};
use rds_core::ModelParams;

/// λ = 2, c = 3, a0 = 0.005 at population `n`.
pub fn reference_params(n: usize) -> ModelParams {
    ModelParams::from_fraction(n, 2.0, 3, 0.005).expect("valid reference parameters")
}

pub fn reference_fluid(dt: f64) -> FluidSolution {
    solve_fluid(&FluidParams::new(2.0, 3, 0.005).expect("valid"), dt).expect("valid step")
}
