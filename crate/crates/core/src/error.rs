use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    /// A chain state violates `0 <= A <= N - n` or `n + A + B <= N`.
    #[error("invalid state (n={n}, A={a}, B={b}) for N={population}")]
    InvalidState {
        n: usize,
        a: usize,
        b: usize,
        population: usize,
    },

    #[error("population exhausted: {interviewed} of {population} already interviewed")]
    PopulationExhausted { interviewed: usize, population: usize },

    /// A diffusion rate matrix has an eigenvalue below the noise floor.
    #[error("rate matrix not positive semidefinite at t={t:.6}: min eigenvalue {min_eigenvalue:.3e}")]
    NotPsd { t: f64, min_eigenvalue: f64 },

    #[error("only {survivors} surviving replicates, at least {required} needed")]
    InsufficientSample { survivors: usize, required: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    /// True for errors caused by bad input rather than a failure at run time.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_) | Error::InvalidState { .. } | Error::PopulationExhausted { .. }
        )
    }
}
