//! The exact discrete-time exploration chain `X_n = (A_n, B_n)` on `G(N, λ/N)`.
//!
//! One step interviews a coupon holder (or a fresh seed when `A_n = 0`), draws
//! `H ~ Bin(unexplored, λ/N)` new contacts and `K ~ Bin(named, λ/N)` already
//! named ones, then hands out `min(H + K, c)` coupons:
//!
//! ```text
//! A_{n+1} = A_n - 1{A_n >= 1} + min(Y, c)
//! B_{n+1} = B_n + H - min(Y, c),        Y = H + K
//! ```
//!
//! Pool sizes count the individuals left after removing the interviewee, so
//! they equal the exact counts seen by an exploration of a concrete graph.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binomial::{self, Binomial};
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Interviews completed `n`, coupon holders `a`, named-without-coupon `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChainState {
    pub n: usize,
    pub a: usize,
    pub b: usize,
}

impl ChainState {
    pub fn new(n: usize, a: usize, b: usize) -> Self {
        ChainState { n, a, b }
    }

    pub fn initial(params: &ModelParams) -> Self {
        ChainState::new(0, params.initial_holders, params.initial_named)
    }

    /// Individuals never named nor interviewed.
    pub fn unexplored(&self, population: usize) -> usize {
        population - self.n - self.a - self.b
    }

    pub fn check(&self, population: usize) -> Result<()> {
        if self.n + self.a + self.b > population {
            return Err(Error::InvalidState {
                n: self.n,
                a: self.a,
                b: self.b,
                population,
            });
        }
        Ok(())
    }
}

/// The state right after the `(n+1)`-th interviewee is removed, before any
/// coupons are handed out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Interview {
    /// Holders left waiting: `a - 1{a >= 1}`.
    pub holders: usize,
    /// Named individuals left; one fewer when a named person must serve as seed.
    pub named: usize,
    /// Unexplored individuals left, the size of the `H` draw.
    pub unexplored: usize,
    pub reseed: bool,
}

impl Interview {
    /// A fresh seed is drawn from the unexplored pool when one exists, otherwise
    /// from the named pool.
    pub(crate) fn of(state: &ChainState, population: usize) -> Self {
        let unexplored = state.unexplored(population);
        if state.a >= 1 {
            Interview {
                holders: state.a - 1,
                named: state.b,
                unexplored,
                reseed: false,
            }
        } else if unexplored >= 1 {
            Interview {
                holders: 0,
                named: state.b,
                unexplored: unexplored - 1,
                reseed: true,
            }
        } else {
            Interview {
                holders: 0,
                named: state.b - 1,
                unexplored: 0,
                reseed: true,
            }
        }
    }
}

fn check_step(state: &ChainState, params: &ModelParams) -> Result<()> {
    params.validate()?;
    state.check(params.population)?;
    if state.n >= params.population {
        return Err(Error::PopulationExhausted {
            interviewed: state.n,
            population: params.population,
        });
    }
    Ok(())
}

/// Size of the `Y` draw for the interview leaving state `(n, a)`: `N - (n+1) - (a - 1{a>=1})`.
pub fn contact_pool(n: usize, a: usize, population: usize) -> usize {
    let holders = a.saturating_sub(1);
    population - (n + 1) - holders
}

/// Samples `X_{n+1}` given `X_n = state`.
pub fn step<R: Rng + ?Sized>(state: &ChainState, params: &ModelParams, rng: &mut R) -> Result<ChainState> {
    check_step(state, params)?;
    Ok(step_unchecked(state, params, rng).0)
}

fn step_unchecked<R: Rng + ?Sized>(state: &ChainState, params: &ModelParams, rng: &mut R) -> (ChainState, bool) {
    let p = params.edge_prob();
    let iv = Interview::of(state, params.population);
    let h = Binomial::new(iv.unexplored as u64, p).sample(rng) as usize;
    let k = Binomial::new(iv.named as u64, p).sample(rng) as usize;
    let given = (h + k).min(params.coupons);
    let next = ChainState {
        n: state.n + 1,
        a: iv.holders + given,
        b: iv.named + h - given,
    };
    (next, iv.reseed)
}

/// Exact `P(X_{n+1} = (a', b') | X_n = (a, b))`.
pub fn transition_prob(
    n: usize,
    from: (usize, usize),
    to: (usize, usize),
    params: &ModelParams,
) -> Result<f64> {
    let state = ChainState::new(n, from.0, from.1);
    check_step(&state, params)?;
    let p = params.edge_prob();
    let c = params.coupons;
    let iv = Interview::of(&state, params.population);
    let (a2, b2) = to;
    if a2 < iv.holders || a2 - iv.holders > c {
        return Ok(0.0);
    }
    let given = a2 - iv.holders;
    // b' = named + h - given
    let h = b2 as i64 + given as i64 - iv.named as i64;
    if h < 0 || h as usize > iv.unexplored {
        return Ok(0.0);
    }
    let h = h as usize;
    let h_mass = binomial::pmf_prefix(iv.unexplored as u64, p, h as u64)[h];
    let k_pmf = binomial::pmf_all(iv.named as u64, p);
    if given < c {
        // h + k == given exactly
        if h > given || given - h > iv.named {
            return Ok(0.0);
        }
        Ok(h_mass * k_pmf[given - h])
    } else {
        let k_min = c.saturating_sub(h);
        let tail: f64 = k_pmf.iter().skip(k_min).sum();
        Ok(h_mass * tail)
    }
}

/// Law of `A_{n+1} - (a - 1{a>=1})` given `A_n = a`: entries `0..c-1` are
/// binomial masses, entry `c` carries the complement.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalRow {
    /// `a - 1{a >= 1}`, the smallest reachable `a'`.
    pub base: usize,
    pub probs: Vec<f64>,
}

impl MarginalRow {
    pub fn prob(&self, a_next: usize) -> f64 {
        if a_next < self.base {
            return 0.0;
        }
        self.probs.get(a_next - self.base).copied().unwrap_or(0.0)
    }
}

pub fn marginal_row(n: usize, a: usize, params: &ModelParams) -> Result<MarginalRow> {
    params.validate()?;
    if n >= params.population {
        return Err(Error::PopulationExhausted {
            interviewed: n,
            population: params.population,
        });
    }
    if a > params.population - n {
        return Err(Error::InvalidState {
            n,
            a,
            b: 0,
            population: params.population,
        });
    }
    Ok(marginal_row_unchecked(n, a, params))
}

pub(crate) fn marginal_row_unchecked(n: usize, a: usize, params: &ModelParams) -> MarginalRow {
    let c = params.coupons;
    let pool = contact_pool(n, a, params.population);
    let mut probs = binomial::pmf_prefix(pool as u64, params.edge_prob(), c as u64 - 1);
    probs.resize(c, 0.0);
    let head: f64 = probs.iter().sum();
    probs.push((1.0 - head).max(0.0));
    MarginalRow {
        base: a.saturating_sub(1),
        probs,
    }
}

/// `P(A_{n+1} = a' | A_n = a)`.
pub fn marginal_transition_a(n: usize, a: usize, a_next: usize, params: &ModelParams) -> Result<f64> {
    Ok(marginal_row(n, a, params)?.prob(a_next))
}

/// A realization of the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: ModelParams,
    /// States `X_0, ..., X_horizon`.
    pub states: Vec<ChainState>,
    /// Steps `n` whose interviewee was a fresh seed (`A_{n-1} = 0`).
    pub reseed_steps: Vec<usize>,
    /// First `n >= 1` with `A_n = 0`, if reached within the horizon.
    pub tau_first: Option<usize>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    /// `X_n`; the last state is held past the horizon.
    pub fn state_at(&self, n: usize) -> ChainState {
        self.states[n.min(self.horizon())]
    }

    pub fn is_reseed(&self, n: usize) -> bool {
        self.reseed_steps.binary_search(&n).is_ok()
    }

    pub(crate) fn from_states(params: ModelParams, states: Vec<ChainState>, reseed_steps: Vec<usize>) -> Self {
        let tau_first = states.iter().skip(1).find(|s| s.a == 0).map(|s| s.n);
        Trajectory {
            params,
            states,
            reseed_steps,
            tau_first,
        }
    }
}

/// The random stream used for a given seed.
pub fn rng_for_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Runs the chain from `X_0` for `horizon` steps with a stream keyed by `seed`.
pub fn simulate_trajectory(params: &ModelParams, seed: u64, horizon: usize) -> Result<Trajectory> {
    let mut rng = rng_for_seed(seed);
    simulate_with_rng(params, horizon, &mut rng)
}

pub fn simulate_with_rng<R: Rng + ?Sized>(params: &ModelParams, horizon: usize, rng: &mut R) -> Result<Trajectory> {
    params.validate()?;
    if horizon > params.population {
        return Err(Error::invalid(format!(
            "horizon {horizon} exceeds population {}",
            params.population
        )));
    }
    let mut state = ChainState::initial(params);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut reseed_steps = Vec::new();
    states.push(state);
    for _ in 0..horizon {
        let (next, reseed) = step_unchecked(&state, params, rng);
        if reseed {
            reseed_steps.push(next.n);
        }
        state = next;
        states.push(state);
    }
    Ok(Trajectory::from_states(*params, states, reseed_steps))
}

/// Runs `A` alone until it first hits 0 (no re-seeding); returns `τ`.
pub fn sample_tau<R: Rng + ?Sized>(params: &ModelParams, rng: &mut R) -> Result<usize> {
    params.validate()?;
    let mut state = ChainState::initial(params);
    loop {
        let (next, _) = step_unchecked(&state, params, rng);
        state = next;
        if state.a == 0 {
            return Ok(state.n);
        }
    }
}
