//! Hitting-time analysis of the `A`-marginal chain.
//!
//! `u_{n0}(n, a) = P(τ = n0 | A_n = a)` solves the backward system
//!
//! ```text
//! u(n0, 0) = 1,    u(n, 0) = 0 for n != n0,
//! u(n, a)  = Σ_{a'} P_n(a, a') u(n+1, a'),    n < n0, a >= 1,
//! ```
//!
//! and `P_n(a, ·)` only reaches `a - 1 ..= a + c - 1`, so each backward step
//! costs `O(width * c)` on the band of reachable states. Values vanish for
//! `a > n0 - n` because `A` drops by at most one per step.
//!
//! Survival `v(n, a) = P(τ > n0 | A_n = a)` uses the same sweep with
//! `v(n0, a) = 1{a >= 1}`. It is identically 1 once `a > n0 - n`; the
//! condition `a >= n` sometimes quoted for it is not the structural one.

use crate::chain::{marginal_row_unchecked, MarginalRow};
use crate::error::{Error, Result};
use crate::output::CsvWriter;
use crate::params::ModelParams;
use std::path::Path;

/// Per-step intervals `[lo, hi]` of reachable `A` values, from step `first`
/// up to `last` inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachableSet {
    pub first: usize,
    bounds: Vec<Option<(usize, usize)>>,
}

impl ReachableSet {
    pub fn last(&self) -> usize {
        self.first + self.bounds.len() - 1
    }

    /// `None` when step `n` is outside the range or its interval is empty.
    pub fn bounds(&self, n: usize) -> Option<(usize, usize)> {
        if n < self.first {
            return None;
        }
        self.bounds.get(n - self.first).copied().flatten()
    }

    pub fn contains(&self, n: usize, a: usize) -> bool {
        self.bounds(n).is_some_and(|(lo, hi)| lo <= a && a <= hi)
    }

    pub fn cardinality(&self) -> usize {
        self.bounds.iter().flatten().map(|(lo, hi)| hi - lo + 1).sum()
    }

    /// Every `(n, a)` with `0 <= a <= N - n` (and `a <= n0 - n` when restricted),
    /// for `n` in `0..=n0` (or `0..=N`).
    pub fn full(params: &ModelParams, n0: Option<usize>) -> Self {
        let last = n0.unwrap_or(params.population);
        let bounds = (0..=last)
            .map(|n| {
                let hi = (params.population - n).min(n0.map_or(usize::MAX, |t| t - n));
                Some((0, hi))
            })
            .collect();
        ReachableSet { first: 0, bounds }
    }
}

/// States reachable from `A_m = ell`:
/// `max(ell - (n-m), 0) <= a <= min(ell + (n-m)(c-1), N - n)`, with the upper
/// bound further capped by `n0 - n` when `n0` is given.
pub fn build_reachable(m: usize, ell: usize, params: &ModelParams, n0: Option<usize>) -> Result<ReachableSet> {
    params.validate()?;
    let big_n = params.population;
    if m > big_n || ell > big_n - m {
        return Err(Error::InvalidState {
            n: m,
            a: ell,
            b: 0,
            population: big_n,
        });
    }
    let last = n0.unwrap_or(big_n).min(big_n);
    let slope = params.coupons - 1;
    let bounds = (m..=last.max(m))
        .map(|n| {
            let d = n - m;
            let lo = ell.saturating_sub(d);
            let mut hi = (ell + d * slope).min(big_n - n);
            if let Some(t) = n0 {
                hi = hi.min(t.saturating_sub(n));
                if n > t {
                    return None;
                }
            }
            (lo <= hi).then_some((lo, hi))
        })
        .collect();
    Ok(ReachableSet { first: m, bounds })
}

/// Banded table of values over a [`ReachableSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct BandTable {
    pub set: ReachableSet,
    values: Vec<Vec<f64>>,
}

impl BandTable {
    /// Zero outside the band.
    pub fn get(&self, n: usize, a: usize) -> f64 {
        match self.set.bounds(n) {
            Some((lo, hi)) if lo <= a && a <= hi => self.values[n - self.set.first][a - lo],
            _ => 0.0,
        }
    }

    /// `(n, a, value)` over the band, ordered by `n` then `a`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values.iter().enumerate().flat_map(move |(i, row)| {
            let n = self.set.first + i;
            let lo = self.set.bounds(n).map_or(0, |b| b.0);
            row.iter().enumerate().map(move |(j, &v)| (n, lo + j, v))
        })
    }

    pub fn write_csv(&self, path: &Path, comments: &[String], value_name: &str) -> Result<()> {
        let mut w = CsvWriter::create(path, comments, &format!("n,a,{value_name}"))?;
        for (n, a, v) in self.iter() {
            w.line(format_args!("{n},{a},{v}"))?;
        }
        w.finish()
    }
}

/// `u_{n0}(n, a)` over the reachable set.
#[derive(Debug, Clone, PartialEq)]
pub struct HittingTable {
    pub n0: usize,
    pub table: BandTable,
}

impl HittingTable {
    pub fn get(&self, n: usize, a: usize) -> f64 {
        self.table.get(n, a)
    }
}

fn dot(row: &MarginalRow, next: &BandTable, n_next: usize) -> f64 {
    row.probs
        .iter()
        .enumerate()
        .map(|(j, p)| p * next.get(n_next, row.base + j))
        .sum()
}

fn check_target(n0: usize, params: &ModelParams) -> Result<()> {
    params.validate()?;
    if n0 > params.population {
        return Err(Error::invalid(format!(
            "target step n0={n0} exceeds population {}",
            params.population
        )));
    }
    Ok(())
}

// Backward sweep over `set`, writing one step at a time.
fn sweep(set: ReachableSet, params: &ModelParams, terminal: impl Fn(usize) -> f64, interior: impl Fn(usize, usize) -> Option<f64>) -> BandTable {
    let steps = set.last() - set.first + 1;
    let mut table = BandTable {
        values: vec![Vec::new(); steps],
        set,
    };
    let last = table.set.last();
    for n in (table.set.first..=last).rev() {
        let Some((lo, hi)) = table.set.bounds(n) else {
            continue;
        };
        let row: Vec<f64> = (lo..=hi)
            .map(|a| {
                if n == last {
                    terminal(a)
                } else if let Some(v) = interior(n, a) {
                    v
                } else {
                    dot(&marginal_row_unchecked(n, a, params), &table, n + 1)
                }
            })
            .collect();
        table.values[n - table.set.first] = row;
    }
    table
}

/// `u_{n0}(n, a)` on the states reachable from `A_m = ell`, restricted to `a <= n0 - n`.
pub fn hitting_distribution(n0: usize, m: usize, ell: usize, params: &ModelParams) -> Result<HittingTable> {
    check_target(n0, params)?;
    let set = if m > n0 {
        ReachableSet {
            first: m,
            bounds: vec![None],
        }
    } else {
        build_reachable(m, ell, params, Some(n0))?
    };
    Ok(hitting_on(n0, set, params))
}

/// `u_{n0}(n, a)` for every `0 <= n <= n0`, `0 <= a <= min(n0 - n, N - n)`.
pub fn hitting_full(n0: usize, params: &ModelParams) -> Result<HittingTable> {
    check_target(n0, params)?;
    Ok(hitting_on(n0, ReachableSet::full(params, Some(n0)), params))
}

fn hitting_on(n0: usize, set: ReachableSet, params: &ModelParams) -> HittingTable {
    let table = sweep(
        set,
        params,
        |a| if a == 0 { 1.0 } else { 0.0 },
        |_, a| (a == 0).then_some(0.0),
    );
    HittingTable { n0, table }
}

/// `P(τ = n0 | A_m = ell)` keeping only two band rows in memory.
pub fn hitting_probability(n0: usize, m: usize, ell: usize, params: &ModelParams) -> Result<f64> {
    check_target(n0, params)?;
    if m > n0 {
        return Ok(0.0);
    }
    let set = build_reachable(m, ell, params, Some(n0))?;
    let Some((lo, hi)) = set.bounds(n0) else {
        return Ok(0.0);
    };
    let mut next: Vec<f64> = (lo..=hi).map(|a| if a == 0 { 1.0 } else { 0.0 }).collect();
    let mut next_lo = lo;
    for n in (m..n0).rev() {
        let Some((lo, hi)) = set.bounds(n) else {
            return Ok(0.0);
        };
        let cur: Vec<f64> = (lo..=hi)
            .map(|a| {
                if a == 0 {
                    return 0.0;
                }
                let row = marginal_row_unchecked(n, a, params);
                row.probs
                    .iter()
                    .enumerate()
                    .map(|(j, p)| {
                        let a2 = row.base + j;
                        if a2 < next_lo {
                            0.0
                        } else {
                            p * next.get(a2 - next_lo).copied().unwrap_or(0.0)
                        }
                    })
                    .sum()
            })
            .collect();
        next = cur;
        next_lo = lo;
    }
    Ok(if ell >= next_lo {
        next.get(ell - next_lo).copied().unwrap_or(0.0)
    } else {
        0.0
    })
}

/// `v(n, a) = P(τ > n0 | A_n = a)` for `0 <= n <= n0`, `0 <= a <= N - n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalTable {
    pub n0: usize,
    pub table: BandTable,
}

impl SurvivalTable {
    pub fn get(&self, n: usize, a: usize) -> f64 {
        self.table.get(n, a)
    }
}

pub fn survival_table(n0: usize, params: &ModelParams) -> Result<SurvivalTable> {
    check_target(n0, params)?;
    let table = sweep(
        ReachableSet::full(params, None).truncated(n0),
        params,
        |a| if a >= 1 { 1.0 } else { 0.0 },
        |n, a| {
            if a == 0 {
                Some(0.0)
            } else if a > n0 - n {
                Some(1.0)
            } else {
                None
            }
        },
    );
    Ok(SurvivalTable { n0, table })
}

impl ReachableSet {
    fn truncated(mut self, last: usize) -> Self {
        self.bounds.truncate(last + 1 - self.first);
        self
    }
}

/// `n0 -> P(τ > n0 | A_0 = params.initial_holders)` for `n0 = 0..=n0_max`,
/// by propagating the killed law of `A` forward.
pub fn seed_survival_curve(params: &ModelParams, n0_max: usize) -> Result<Vec<f64>> {
    params.validate()?;
    let big_n = params.population;
    let n0_max = n0_max.min(big_n);
    let mut law = vec![0.0; big_n + 1];
    law[params.initial_holders] = 1.0;
    let mut curve = Vec::with_capacity(n0_max + 1);
    curve.push(law[1..].iter().sum());
    for n in 0..n0_max {
        let top = big_n - n;
        let mut next = vec![0.0; big_n + 1];
        for a in 1..=top {
            let mass = law[a];
            if mass == 0.0 {
                continue;
            }
            let row = marginal_row_unchecked(n, a, params);
            for (j, p) in row.probs.iter().enumerate() {
                next[row.base + j] += mass * p;
            }
        }
        next[0] = 0.0;
        law = next;
        curve.push(law[1..].iter().sum());
    }
    Ok(curve)
}

/// Seed survival curves for `c = 1..=c_max` as `(c, n0, prob)` rows, `n0 >= 1`.
pub fn seed_curves(params: &ModelParams, c_max: usize, n0_max: usize) -> Result<Vec<(usize, usize, f64)>> {
    let mut rows = Vec::new();
    for c in 1..=c_max {
        let p = ModelParams { coupons: c, ..*params };
        let curve = seed_survival_curve(&p, n0_max)?;
        rows.extend(curve.iter().enumerate().skip(1).map(|(n0, &v)| (c, n0, v)));
    }
    Ok(rows)
}

pub fn write_seed_curves(path: &Path, comments: &[String], rows: &[(usize, usize, f64)]) -> Result<()> {
    let mut w = CsvWriter::create(path, comments, "c,n0,prob")?;
    for (c, n0, p) in rows {
        w.line(format_args!("{c},{n0},{p}"))?;
    }
    w.finish()
}
