pub mod binomial;
pub mod chain;
pub mod error;
pub mod fluctuations;
pub mod fluid;
pub mod graph;
pub mod hitting;
pub mod montecarlo;
pub mod output;
pub mod params;

pub use chain::{ChainState, Trajectory};
pub use error::{Error, Result};
pub use fluctuations::RateSource;
pub use fluid::{FluidParams, FluidSolution};
pub use params::ModelParams;
