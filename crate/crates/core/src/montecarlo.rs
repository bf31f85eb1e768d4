//! Seeded replication over many chain trajectories.
//!
//! Replicate `r` (1-based) always uses seed `seed_base + r`, so results do not
//! depend on the thread count or scheduling.

use std::path::Path;

use nalgebra::Matrix2;
use rayon::prelude::*;

use crate::chain::{rng_for_seed, simulate_with_rng, Trajectory};
use crate::error::{Error, Result};
use crate::fluctuations::{deviation_at, propagate_covariance, survives, RateSource};
use crate::fluid::{solve_fluid, FluidParams, FluidSolution};
use crate::output::CsvWriter;
use crate::params::ModelParams;

/// Fewest surviving replicates accepted by [`clt_report`].
pub const MIN_SURVIVORS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub lambda: f64,
    pub coupons: usize,
    /// Initial coupon-holder fraction; `A0 = round(a0 · N)`.
    pub a0: f64,
    pub replicates: usize,
    pub dt: f64,
    /// Population sizes, strictly increasing.
    pub populations: Vec<usize>,
    pub seed_base: u64,
    pub rate_source: RateSource,
    pub sigma0: Matrix2<f64>,
}

impl ExperimentConfig {
    pub fn new(lambda: f64, coupons: usize, a0: f64, populations: Vec<usize>) -> Self {
        ExperimentConfig {
            lambda,
            coupons,
            a0,
            replicates: 100,
            dt: 1e-4,
            populations,
            seed_base: 0,
            rate_source: RateSource::Oracle,
            sigma0: Matrix2::zeros(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        if self.populations.is_empty() {
            return Err(Error::invalid("population grid is empty"));
        }
        if self.populations.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("population grid must be strictly increasing"));
        }
        for &n in &self.populations {
            self.model(n)?;
        }
        self.fluid_params()?;
        Ok(())
    }

    pub fn model(&self, population: usize) -> Result<ModelParams> {
        ModelParams::from_fraction(population, self.lambda, self.coupons, self.a0)
    }

    pub fn fluid_params(&self) -> Result<FluidParams> {
        FluidParams::new(self.lambda, self.coupons, self.a0)
    }

    pub fn solve_fluid(&self) -> Result<FluidSolution> {
        solve_fluid(&self.fluid_params()?, self.dt.min(1e-2))
    }

    pub fn seed(&self, replicate: usize) -> u64 {
        self.seed_base.wrapping_add(replicate as u64)
    }
}

/// Runs replicates `1..=replicates` in parallel and maps each trajectory
/// through `f`; the output is ordered by replicate.
pub fn run_replicates_with<T, F>(
    params: &ModelParams,
    replicates: usize,
    seed_base: u64,
    horizon: usize,
    f: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &Trajectory) -> T + Sync,
{
    params.validate()?;
    (1..=replicates)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng_for_seed(seed_base.wrapping_add(r as u64));
            simulate_with_rng(params, horizon, &mut rng).map(|traj| f(r, &traj))
        })
        .collect()
}

/// Per-replicate digest.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSummary {
    pub replicate: usize,
    pub seed: u64,
    pub tau: Option<usize>,
    pub final_a: usize,
    pub final_b: usize,
    pub reseeds: usize,
    /// `sup_t ‖X_t/N - x_t‖₁`, present when a fluid path was supplied.
    pub sup_err: Option<f64>,
}

/// Runs the chain over `[0, N]` for each replicate and summarizes it.
pub fn run_replicates(
    params: &ModelParams,
    replicates: usize,
    seed_base: u64,
    fluid: Option<&FluidSolution>,
) -> Result<Vec<ReplicateSummary>> {
    run_replicates_with(params, replicates, seed_base, params.population, |r, traj| {
        ReplicateSummary::of(r, seed_base.wrapping_add(r as u64), traj, fluid)
    })
}

impl ReplicateSummary {
    pub fn of(replicate: usize, seed: u64, traj: &Trajectory, fluid: Option<&FluidSolution>) -> Self {
        let last = traj.states[traj.horizon()];
        ReplicateSummary {
            replicate,
            seed,
            tau: traj.tau_first,
            final_a: last.a,
            final_b: last.b,
            reseeds: traj.reseed_steps.len(),
            sup_err: fluid.map(|f| sup_error(traj, f)),
        }
    }
}

pub fn write_summaries(path: &Path, comments: &[String], rows: &[ReplicateSummary]) -> Result<()> {
    let mut w = CsvWriter::create(path, comments, "replicate,seed,tau,final_A,final_B,reseeds,sup_err")?;
    for s in rows {
        let tau = s.tau.map(|t| t.to_string()).unwrap_or_default();
        let err = s.sup_err.map(|e| e.to_string()).unwrap_or_default();
        w.line(format_args!(
            "{},{},{},{},{},{},{}",
            s.replicate, s.seed, tau, s.final_a, s.final_b, s.reseeds, err
        ))?;
    }
    w.finish()
}

/// Writes `replicate,n,A,B,reseed` rows.
pub fn write_trajectories(path: &Path, comments: &[String], trajs: &[(usize, Trajectory)]) -> Result<()> {
    let mut w = CsvWriter::create(path, comments, "replicate,n,A,B,reseed")?;
    for (r, traj) in trajs {
        for s in &traj.states {
            w.line(format_args!("{},{},{},{},{}", r, s.n, s.a, s.b, u8::from(traj.is_reseed(s.n))))?;
        }
    }
    w.finish()
}

/// `sup_{t∈[0,1]} ‖X_{⌊Nt⌋}/N - x_t‖₁`, checking each step interval at both ends.
pub fn sup_error(traj: &Trajectory, fluid: &FluidSolution) -> f64 {
    let n_pop = traj.params.population as f64;
    let mut sup: f64 = 0.0;
    for s in &traj.states {
        let (xa, xb) = (s.a as f64 / n_pop, s.b as f64 / n_pop);
        let left = s.n as f64 / n_pop;
        let right = ((s.n + 1) as f64 / n_pop).min(1.0);
        for t in [left, right] {
            let (a, b) = fluid.at(t);
            sup = sup.max((xa - a).abs() + (xb - b).abs());
        }
    }
    sup
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlnRow {
    pub population: usize,
    pub median_sup_err: f64,
    pub p90_sup_err: f64,
    pub replicates: usize,
}

/// Median and 90th percentile of the sup-norm error for every population size.
pub fn lln_report(cfg: &ExperimentConfig) -> Result<Vec<LlnRow>> {
    cfg.validate()?;
    let fluid = cfg.solve_fluid()?;
    cfg.populations
        .iter()
        .map(|&n| {
            let params = cfg.model(n)?;
            let errs = run_replicates_with(&params, cfg.replicates, cfg.seed_base, n, |_, t| sup_error(t, &fluid))?;
            Ok(LlnRow {
                population: n,
                median_sup_err: quantile(&errs, 0.5),
                p90_sup_err: quantile(&errs, 0.9),
                replicates: errs.len(),
            })
        })
        .collect()
}

pub fn write_lln(path: &Path, comments: &[String], rows: &[LlnRow]) -> Result<()> {
    let mut w = CsvWriter::create(path, comments, "N,median_sup_err,p90_sup_err,replicates")?;
    for r in rows {
        w.line(format_args!("{},{},{},{}", r.population, r.median_sup_err, r.p90_sup_err, r.replicates))?;
    }
    w.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltSummaryRow {
    pub population: usize,
    pub t: f64,
    pub var_emp: f64,
    pub var_theory: f64,
    pub ratio: f64,
    /// Standard error of `var_emp`.
    pub stderr: f64,
    pub survivors: usize,
    /// Sample covariance of both rescaled coordinates.
    pub cov_emp: Matrix2<f64>,
    pub cov_theory: Matrix2<f64>,
}

/// Unbiased sample variance and its delta-method standard error
/// `sqrt((m4 - s⁴ (n-3)/(n-1)) / n)`.
pub fn variance_with_stderr(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let s2 = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m4 = x.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    let var_s2 = (m4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n;
    (s2, var_s2.max(0.0).sqrt())
}

fn sample_covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (n - 1.0)
}

/// Result of [`clt_report`] for one population size.
#[derive(Debug, Clone, PartialEq)]
pub struct CltReport {
    pub population: usize,
    pub replicates: usize,
    pub survivors: usize,
    /// Replicates are kept when `τ >= ⌊N · conditioned_on⌋`.
    pub conditioned_on: f64,
    pub rows: Vec<CltSummaryRow>,
}

impl CltReport {
    pub fn exclusion_fraction(&self) -> f64 {
        1.0 - self.survivors as f64 / self.replicates as f64
    }
}

/// Empirical against propagated variance of `√N(A_t/N - a_t)` at
/// `t = q · t0` for each `q` in `quantiles`.
///
/// Replicates whose `A` dies before `⌊N · t_cond⌋` are excluded, where
/// `t_cond` is `condition_on` or, when `None`, the last checkpoint.
pub fn clt_report(
    cfg: &ExperimentConfig,
    population: usize,
    quantiles: &[f64],
    condition_on: Option<f64>,
) -> Result<CltReport> {
    cfg.validate()?;
    if quantiles.is_empty() || quantiles.iter().any(|q| !(0.0..1.0).contains(q)) {
        return Err(Error::invalid("checkpoint quantiles must lie in [0, 1)"));
    }
    let fluid = cfg.solve_fluid()?;
    let params = cfg.model(population)?;
    let times: Vec<f64> = quantiles.iter().map(|q| q * fluid.t0).collect();
    let t_cond = condition_on.unwrap_or_else(|| times.iter().cloned().fold(0.0, f64::max));
    let horizon = crate::fluctuations::floor_index(population, t_cond.max(fluid.t0)).min(population);
    let samples = run_replicates_with(&params, cfg.replicates, cfg.seed_base, horizon, |_, traj| {
        survives(traj, t_cond).then(|| times.iter().map(|&t| deviation_at(traj, &fluid, t)).collect::<Vec<_>>())
    })?;
    let kept: Vec<_> = samples.into_iter().flatten().collect();
    if kept.len() < MIN_SURVIVORS {
        return Err(Error::InsufficientSample {
            survivors: kept.len(),
            required: MIN_SURVIVORS,
        });
    }
    let theory = propagate_covariance(&fluid, cfg.sigma0, cfg.rate_source, cfg.dt)?;
    let rows = times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let w1: Vec<f64> = kept.iter().map(|w| w[j].x).collect();
            let w2: Vec<f64> = kept.iter().map(|w| w[j].y).collect();
            let (var_emp, stderr) = variance_with_stderr(&w1);
            let c12 = sample_covariance(&w1, &w2);
            let cov_emp = Matrix2::new(var_emp, c12, c12, sample_covariance(&w2, &w2));
            let cov_theory = theory.at(t);
            CltSummaryRow {
                population,
                t,
                var_emp,
                var_theory: cov_theory.m11,
                ratio: var_emp / cov_theory.m11,
                stderr,
                survivors: kept.len(),
                cov_emp,
                cov_theory,
            }
        })
        .collect();
    Ok(CltReport {
        population,
        replicates: cfg.replicates,
        survivors: kept.len(),
        conditioned_on: t_cond,
        rows,
    })
}

pub fn write_clt_summary(path: &Path, comments: &[String], rows: &[CltSummaryRow]) -> Result<()> {
    let mut w = CsvWriter::create(path, comments, "N,t,var_emp,var_theory,ratio,stderr,survivors")?;
    for r in rows {
        w.line(format_args!(
            "{},{},{},{},{},{},{}",
            r.population, r.t, r.var_emp, r.var_theory, r.ratio, r.stderr, r.survivors
        ))?;
    }
    w.finish()
}
