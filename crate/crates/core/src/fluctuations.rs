//! Gaussian fluctuations around the fluid path on `[0, t0]`.
//!
//! The limit `W` solves the linear SDE `dW = F(t) W dt + dM` with
//! `F(t) = [[φ'(s), 0], [-λ - φ'(s), -λ]]`, `s = t + a_t`, and a martingale `M`
//! whose quadratic variation has density `m(t, a_t, b_t)`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix2, SymmetricEigen, Vector2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::chain::Trajectory;
use crate::error::{Error, Result};
use crate::fluid::{poisson_prefix, FluidParams, FluidSolution};
use crate::output::CsvWriter;

/// Eigenvalues above `-PSD_FLOOR` are treated as rounding noise.
pub const PSD_FLOOR: f64 = 1e-8;

/// Which formulas supply the diffusion rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RateSource {
    /// The published `m11`, `m12`, `m22` expressions.
    Paper,
    /// Rates rebuilt from the exact conditional moments of one step.
    Oracle,
}

impl fmt::Display for RateSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateSource::Paper => "paper",
            RateSource::Oracle => "oracle",
        })
    }
}

impl FromStr for RateSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(RateSource::Paper),
            "oracle" => Ok(RateSource::Oracle),
            other => Err(Error::invalid(format!("unknown rate source '{other}' (expected paper or oracle)"))),
        }
    }
}

/// Entries of the symmetric diffusion-rate matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceRates {
    pub m11: f64,
    pub m12: f64,
    pub m22: f64,
}

impl CovarianceRates {
    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.m11, self.m12, self.m12, self.m22)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let half_trace = 0.5 * (self.m11 + self.m22);
        let half_gap = (0.25 * (self.m11 - self.m22).powi(2) + self.m12 * self.m12).sqrt();
        half_trace - half_gap
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -PSD_FLOOR
    }
}

/// Literal evaluation of the published rate formulas at `(t, a, b)`.
pub fn covariance_rates(t: f64, a: f64, b: f64, lambda: f64, c: usize) -> CovarianceRates {
    let p = poisson_prefix(t + a, lambda, c);
    let mut first = 0.0;
    let mut second = 0.0;
    let mut mass = 0.0;
    for (k, pk) in p.iter().enumerate() {
        let d = (c - k) as f64;
        first += d * pk;
        second += d * d * pk;
        mass += pk;
    }
    let m11 = second - first * first;
    let rest = lambda * (1.0 - t - a - b);
    let bracket = c as f64 * (lambda - 1.0) + mass;
    CovarianceRates {
        m11,
        m22: rest + 2.0 * rest * bracket + m11,
        m12: rest * bracket - m11,
    }
}

/// Limits of the exact one-step moments.
///
/// `Y ~ Poisson(μ)` with `μ = λ(1 - t - a)` counts eligible contacts, `H` is
/// the unexplored part (binomial thinning of `Y` with `r = (1-t-a-b)/(1-t-a)`)
/// and the increments are `ΔA + 1 = Y∧c` and `ΔB = H - Y∧c`.
pub fn oracle_rates(t: f64, a: f64, b: f64, lambda: f64, c: usize) -> CovarianceRates {
    let free = 1.0 - t - a;
    let mu = lambda * free;
    let r = if free > 0.0 { ((1.0 - t - a - b) / free).clamp(0.0, 1.0) } else { 0.0 };
    let p = poisson_prefix(t + a, lambda, c.saturating_sub(1));
    let (mut below, mut m1_below, mut m2_below) = (0.0, 0.0, 0.0);
    for (k, pk) in p.iter().enumerate().take(c) {
        let k = k as f64;
        below += pk;
        m1_below += k * pk;
        m2_below += k * k * pk;
    }
    let tail = (1.0 - below).max(0.0);
    let cf = c as f64;
    let e_min = m1_below + cf * tail;
    let e_min_sq = m2_below + cf * cf * tail;
    // E[Y (Y∧c)] = Σ_{k<c} k² p_k + c Σ_{k>=c} k p_k, and Σ_{k>=c} k p_k = μ - Σ_{k<c} k p_k.
    let e_y_min = m2_below + cf * (mu - m1_below);
    let var_min = (e_min_sq - e_min * e_min).max(0.0);
    let var_h = r * mu;
    let cov_h_min = r * (e_y_min - mu * e_min);
    CovarianceRates {
        m11: var_min,
        m12: cov_h_min - var_min,
        m22: var_h - 2.0 * cov_h_min + var_min,
    }
}

pub fn rates(source: RateSource, t: f64, a: f64, b: f64, lambda: f64, c: usize) -> CovarianceRates {
    match source {
        RateSource::Paper => covariance_rates(t, a, b, lambda, c),
        RateSource::Oracle => oracle_rates(t, a, b, lambda, c),
    }
}

/// Drift matrix `F(t)` of the limit SDE.
pub fn drift_matrix(t: f64, a: f64, fp: &FluidParams) -> Matrix2<f64> {
    let d = fp.phi_prime(t + a);
    Matrix2::new(d, 0.0, -fp.lambda - d, -fp.lambda)
}

/// Square root of a symmetric PSD matrix; eigenvalues in `[-PSD_FLOOR, 0)` are floored at 0.
pub fn psd_sqrt(m: &Matrix2<f64>, t: f64) -> Result<Matrix2<f64>> {
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.min();
    if min < -PSD_FLOOR {
        return Err(Error::NotPsd { t, min_eigenvalue: min });
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(eig.eigenvectors * Matrix2::from_diagonal(&roots) * eig.eigenvectors.transpose())
}

fn check_sigma0(sigma0: &Matrix2<f64>) -> Result<()> {
    if (sigma0.m12 - sigma0.m21).abs() > 1e-12 || sigma0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial covariance must be a finite symmetric matrix"));
    }
    let min = SymmetricEigen::new(*sigma0).eigenvalues.min();
    if min < -1e-12 {
        return Err(Error::invalid(format!(
            "initial covariance is not positive semidefinite (min eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

fn time_grid(t0: f64, dt: f64) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt <= 1e-2) {
        return Err(Error::invalid(format!("dt={dt} must lie in (0, 1e-2]")));
    }
    let steps = ((t0 / dt).ceil() as usize).max(1);
    Ok((steps, t0 / steps as f64))
}

/// `Σ(t)` on a uniform grid over `[0, t0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSeries {
    pub source: RateSource,
    pub times: Vec<f64>,
    pub sigma: Vec<Matrix2<f64>>,
}

impl CovarianceSeries {
    /// Linear interpolation in `t`, clamped to the grid.
    pub fn at(&self, t: f64) -> Matrix2<f64> {
        let last = self.times.len() - 1;
        let end = self.times[last];
        if last == 0 || t >= end {
            return self.sigma[last];
        }
        if t <= 0.0 {
            return self.sigma[0];
        }
        let h = end / last as f64;
        let i = ((t / h).floor() as usize).min(last - 1);
        let w = (t - self.times[i]) / h;
        self.sigma[i] * (1.0 - w) + self.sigma[i + 1] * w
    }
}

type Joint = (f64, f64, Matrix2<f64>);

fn joint_rhs(fp: &FluidParams, source: RateSource, t: f64, y: &Joint) -> Joint {
    let (a, b, sigma) = *y;
    let (da, db) = fp.drift(t, a, b);
    let f = drift_matrix(t, a, fp);
    let m = rates(source, t, a, b, fp.lambda, fp.coupons).matrix();
    (da, db, f * sigma + sigma * f.transpose() + m)
}

fn joint_step(fp: &FluidParams, source: RateSource, t: f64, y: &Joint, h: f64) -> Joint {
    let shift = |y: &Joint, k: &Joint, s: f64| (y.0 + s * k.0, y.1 + s * k.1, y.2 + k.2 * s);
    let k1 = joint_rhs(fp, source, t, y);
    let k2 = joint_rhs(fp, source, t + h / 2.0, &shift(y, &k1, h / 2.0));
    let k3 = joint_rhs(fp, source, t + h / 2.0, &shift(y, &k2, h / 2.0));
    let k4 = joint_rhs(fp, source, t + h, &shift(y, &k3, h));
    let sigma = y.2 + (k1.2 + k2.2 * 2.0 + k3.2 * 2.0 + k4.2) * (h / 6.0);
    (
        y.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        y.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        0.5 * (sigma + sigma.transpose()),
    )
}

/// Integrates `Σ' = FΣ + ΣFᵀ + m` on `[0, t0]` by RK4, carrying `(a, b)` along.
pub fn propagate_covariance(
    fluid: &FluidSolution,
    sigma0: Matrix2<f64>,
    source: RateSource,
    dt: f64,
) -> Result<CovarianceSeries> {
    check_sigma0(&sigma0)?;
    let fp = fluid.params;
    let (steps, h) = time_grid(fluid.t0, dt)?;
    let mut times = Vec::with_capacity(steps + 1);
    let mut sigma = Vec::with_capacity(steps + 1);
    let mut y: Joint = (fp.a0, 0.0, sigma0);
    times.push(0.0);
    sigma.push(sigma0);
    for i in 0..steps {
        y = joint_step(&fp, source, i as f64 * h, &y, h);
        times.push((i + 1) as f64 * h);
        sigma.push(y.2);
    }
    Ok(CovarianceSeries { source, times, sigma })
}

/// One sample path of the limit SDE.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationPath {
    pub times: Vec<f64>,
    pub w: Vec<Vector2<f64>>,
}

fn gaussian_pair<R: Rng + ?Sized>(rng: &mut R) -> Vector2<f64> {
    Vector2::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Euler–Maruyama path of `dW = F W dt + L dB` on `[0, t0]`, `W0 ~ N(0, Σ0)`.
///
/// Fails with [`Error::NotPsd`] when a rate matrix along the path has an
/// eigenvalue below `-PSD_FLOOR`.
pub fn simulate_fluctuation<R: Rng + ?Sized>(
    fluid: &FluidSolution,
    sigma0: Matrix2<f64>,
    source: RateSource,
    dt: f64,
    rng: &mut R,
) -> Result<FluctuationPath> {
    check_sigma0(&sigma0)?;
    let fp = fluid.params;
    let (steps, h) = time_grid(fluid.t0, dt)?;
    let sq = h.sqrt();
    let mut w = psd_sqrt(&sigma0, 0.0)? * gaussian_pair(rng);
    let (mut a, mut b) = (fp.a0, 0.0);
    let mut times = Vec::with_capacity(steps + 1);
    let mut path = Vec::with_capacity(steps + 1);
    times.push(0.0);
    path.push(w);
    for i in 0..steps {
        let t = i as f64 * h;
        let f = drift_matrix(t, a, &fp);
        let l = psd_sqrt(&rates(source, t, a, b, fp.lambda, fp.coupons).matrix(), t)?;
        w = w + f * w * h + l * gaussian_pair(rng) * sq;
        (a, b) = fp.rk4_step(t, a, b, h);
        times.push((i + 1) as f64 * h);
        path.push(w);
    }
    Ok(FluctuationPath { times, w: path })
}

fn check_match(traj: &Trajectory, fluid: &FluidSolution) -> Result<()> {
    let p = &traj.params;
    let fp = &fluid.params;
    let a0 = (fp.a0 * p.population as f64).round().max(1.0) as usize;
    if p.lambda != fp.lambda || p.coupons != fp.coupons || p.initial_holders != a0 || p.initial_named != 0 {
        return Err(Error::invalid(format!(
            "trajectory (lambda={}, c={}, A0={}, B0={}) does not match fluid (lambda={}, c={}, a0={})",
            p.lambda, p.coupons, p.initial_holders, p.initial_named, fp.lambda, fp.coupons, fp.a0
        )));
    }
    Ok(())
}

/// `⌊N t⌋`, robust to `t` landing a rounding error below a multiple of `1/N`.
pub fn floor_index(population: usize, t: f64) -> usize {
    (population as f64 * t + 1e-9).floor() as usize
}

/// `√N (X_{⌊Nt⌋}/N - x_t)`.
pub fn deviation_at(traj: &Trajectory, fluid: &FluidSolution, t: f64) -> Vector2<f64> {
    let n = traj.params.population as f64;
    let state = traj.state_at(floor_index(traj.params.population, t));
    let (a, b) = fluid.at(t);
    Vector2::new(state.a as f64 / n - a, state.b as f64 / n - b) * n.sqrt()
}

/// True when the first passage of `A` to 0 happens at or after `⌊N t⌋`.
pub fn survives(traj: &Trajectory, t: f64) -> bool {
    let cutoff = floor_index(traj.params.population, t);
    match traj.tau_first {
        Some(tau) => tau >= cutoff,
        None => traj.horizon() >= cutoff,
    }
}

/// Rescaled deviations of one trajectory on the fluid grid over `[0, t0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalPath {
    pub times: Vec<f64>,
    pub w: Vec<Vector2<f64>>,
}

/// `W^N` on the fluid grid restricted to `[0, t0]`, or `None` when the
/// trajectory is excluded because `τ < ⌊N·t_cond⌋`.
///
/// `t_cond = fluid.t0` gives conditioning on survival to `t0`.
pub fn empirical_fluctuation(traj: &Trajectory, fluid: &FluidSolution, t_cond: f64) -> Result<Option<EmpiricalPath>> {
    check_match(traj, fluid)?;
    if !(0.0..=1.0).contains(&t_cond) {
        return Err(Error::invalid(format!("conditioning time {t_cond} outside [0, 1]")));
    }
    let last = fluid.last_index_before_t0();
    if traj.horizon() < floor_index(traj.params.population, fluid.times[last]) {
        return Err(Error::invalid(format!(
            "trajectory horizon {} stops before N·t0",
            traj.horizon()
        )));
    }
    if !survives(traj, t_cond) {
        return Ok(None);
    }
    let times = fluid.times[..=last].to_vec();
    let w = times.iter().map(|&t| deviation_at(traj, fluid, t)).collect();
    Ok(Some(EmpiricalPath { times, w }))
}

/// One row of `clt.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct CltRow {
    pub t: f64,
    pub theory: Matrix2<f64>,
    pub empirical: Option<Matrix2<f64>>,
    pub source: RateSource,
}

pub fn write_clt_csv(path: &Path, comments: &[String], rows: &[CltRow]) -> Result<()> {
    let mut w = CsvWriter::create(
        path,
        comments,
        "t,var11_theory,cov12_theory,var22_theory,var11_empirical,cov12_empirical,var22_empirical,source",
    )?;
    for r in rows {
        let emp = match r.empirical {
            Some(e) => format!("{},{},{}", e.m11, e.m12, e.m22),
            None => ",,".to_string(),
        };
        w.line(format_args!(
            "{},{},{},{},{},{}",
            r.t, r.theory.m11, r.theory.m12, r.theory.m22, emp, r.source
        ))?;
    }
    w.finish()
}

/// Paper and oracle rates side by side along the fluid path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateComparison {
    pub t: f64,
    pub a: f64,
    pub b: f64,
    pub paper: CovarianceRates,
    pub oracle: CovarianceRates,
}

/// Evaluates both rate sets at every fluid grid point in `[0, t0]`.
pub fn compare_rates(fluid: &FluidSolution) -> Vec<RateComparison> {
    let fp = &fluid.params;
    (0..=fluid.last_index_before_t0())
        .map(|i| {
            let (t, a, b) = (fluid.times[i], fluid.a[i], fluid.b[i]);
            RateComparison {
                t,
                a,
                b,
                paper: covariance_rates(t, a, b, fp.lambda, fp.coupons),
                oracle: oracle_rates(t, a, b, fp.lambda, fp.coupons),
            }
        })
        .collect()
}

pub fn write_rate_comparison(path: &Path, comments: &[String], rows: &[RateComparison]) -> Result<()> {
    let mut w = CsvWriter::create(
        path,
        comments,
        "t,a,b,m11_paper,m12_paper,m22_paper,m11_oracle,m12_oracle,m22_oracle,paper_psd,oracle_psd",
    )?;
    for r in rows {
        w.line(format_args!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.t,
            r.a,
            r.b,
            r.paper.m11,
            r.paper.m12,
            r.paper.m22,
            r.oracle.m11,
            r.oracle.m12,
            r.oracle.m22,
            r.paper.is_psd(),
            r.oracle.is_psd()
        ))?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::solve_fluid;

    #[test]
    fn degenerate_point_has_zero_rates() {
        for c in 1..5 {
            for source in [RateSource::Paper, RateSource::Oracle] {
                let r = rates(source, 0.6, 0.4, 0.0, 2.0, c);
                assert!(r.m11.abs() < 1e-15 && r.m12.abs() < 1e-15 && r.m22.abs() < 1e-15, "{r:?}");
            }
        }
    }

    #[test]
    fn empty_graph_rates_vanish() {
        let r = oracle_rates(0.3, 0.2, 0.1, 0.0, 3);
        assert_eq!((r.m11, r.m12, r.m22), (0.0, 0.0, 0.0));
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = Matrix2::new(2.0, 0.5, 0.5, 1.0);
        let l = psd_sqrt(&m, 0.0).unwrap();
        assert!((l * l - m).norm() < 1e-12);
        let noisy = Matrix2::new(1.0, 1.0, 1.0, 1.0 - 1e-10);
        assert!(psd_sqrt(&noisy, 0.0).is_ok());
        let bad = Matrix2::new(1.0, 2.0, 2.0, 1.0);
        assert!(matches!(psd_sqrt(&bad, 0.5), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn rate_source_round_trip() {
        for s in [RateSource::Paper, RateSource::Oracle] {
            assert_eq!(s.to_string().parse::<RateSource>().unwrap(), s);
        }
        assert!("both".parse::<RateSource>().is_err());
    }

    #[test]
    fn rejects_indefinite_sigma0() {
        let fluid = solve_fluid(&FluidParams::new(2.0, 3, 0.05).unwrap(), 1e-3).unwrap();
        let bad = Matrix2::new(1.0, 2.0, 2.0, 1.0);
        assert!(propagate_covariance(&fluid, bad, RateSource::Oracle, 1e-3).is_err());
    }

    #[test]
    fn covariance_grid_ends_at_t0() {
        let fluid = solve_fluid(&FluidParams::new(2.0, 3, 0.05).unwrap(), 1e-3).unwrap();
        let s = propagate_covariance(&fluid, Matrix2::zeros(), RateSource::Oracle, 1e-3).unwrap();
        assert!((s.times.last().unwrap() - fluid.t0).abs() < 1e-12);
        assert_eq!(s.sigma[0], Matrix2::zeros());
        assert!(s.sigma.iter().all(|m| m.m11 >= 0.0 && m.m12 == m.m21));
        assert_eq!(s.at(s.times[10]), s.sigma[10]);
    }
}
