//! Deterministic fluid limit of the rescaled chain.
//!
//! With `p_k(z)` the `Poisson(λ(1-z))` mass at `k` and
//! `φ(z) = c - Σ_{k<c} (c-k) p_k(z) = E[min(Poisson(λ(1-z)), c)]`,
//!
//! ```text
//! da/dt = φ(t + a) - 1{a > 0}
//! db/dt = λ(1 - t - a - b) - φ(t + a)
//! ```
//!
//! The right-hand side jumps on `a = 0`. Once `a` reaches zero at `t0` it stays
//! there (both one-sided fields point at the axis), so the solver stops the
//! `a` equation at the event and carries `b` on with `a ≡ 0`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::output::CsvWriter;

const EVENT_TOL: f64 = 1e-10;

/// `P(Poisson(λ(1-z)) = k)` for `k = 0..=kmax`.
pub fn poisson_prefix(z: f64, lambda: f64, kmax: usize) -> Vec<f64> {
    let mean = lambda * (1.0 - z);
    let mut term = (-mean).exp();
    let mut out = Vec::with_capacity(kmax + 1);
    out.push(term);
    for k in 1..=kmax {
        term *= mean / k as f64;
        out.push(term);
    }
    out
}

/// `p_k(z) = (λ(1-z))^k / k! · e^{-λ(1-z)}`.
pub fn pk(k: usize, z: f64, lambda: f64) -> f64 {
    poisson_prefix(z, lambda, k)[k]
}

/// `φ(z) = c - Σ_{k=0}^{c-1} (c-k) p_k(z)`.
pub fn phi(z: f64, lambda: f64, c: usize) -> f64 {
    let p = poisson_prefix(z, lambda, c - 1);
    c as f64 - p.iter().enumerate().map(|(k, pk)| (c - k) as f64 * pk).sum::<f64>()
}

/// `φ'(z) = -λ Σ_{k=0}^{c-1} p_k(z)`; for `c >= 2` this is
/// `λ e^{-λ(1-z)} [-1 - Σ_{k=1}^{c-2} (λ(1-z))^k/k! - (λ(1-z))^{c-1}/(c-1)!]`.
pub fn phi_prime(z: f64, lambda: f64, c: usize) -> f64 {
    -lambda * poisson_prefix(z, lambda, c - 1).iter().sum::<f64>()
}

/// `E[min(Y, c)]` with `Y ~ Poisson(λ(1-z))`, written as
/// `Σ_{k<c} k p_k + c P(Y >= c)`; equal to [`phi`].
pub fn phi_expectation(z: f64, lambda: f64, c: usize) -> f64 {
    let p = poisson_prefix(z, lambda, c - 1);
    let head: f64 = p.iter().sum();
    let partial: f64 = p.iter().enumerate().map(|(k, pk)| k as f64 * pk).sum();
    partial + c as f64 * (1.0 - head)
}

/// Root of `φ(z) = 1` on `[0, 1]`, or `None` when `φ(0) <= 1` (always for `c = 1`).
///
/// `φ` is strictly decreasing with `φ(1) = 0`, so plain bisection brackets the
/// unique root. The root is not in general above `1 - 1/λ`:
/// `φ(1 - 1/λ) = E[min(Poisson(1), c)] < 1`.
pub fn find_zc(lambda: f64, c: usize) -> Option<f64> {
    if phi(0.0, lambda, c) <= 1.0 {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = phi(mid, lambda, c) - 1.0;
        if f.abs() < 1e-14 || hi - lo < 1e-16 {
            return Some(mid);
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Parameters of the limit ODE; `b0` is fixed at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidParams {
    pub lambda: f64,
    pub coupons: usize,
    /// Initial coupon-holder fraction `a0 ∈ (0, 1]`.
    pub a0: f64,
}

impl FluidParams {
    pub fn new(lambda: f64, coupons: usize, a0: f64) -> Result<Self> {
        let fp = FluidParams { lambda, coupons, a0 };
        fp.validate()?;
        Ok(fp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0 && self.a0 <= 1.0) {
            return Err(Error::invalid(format!("a0={} must lie in (0, 1]", self.a0)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda={} must be finite and non-negative", self.lambda)));
        }
        if self.coupons == 0 {
            return Err(Error::invalid("coupon cap c must be at least 1"));
        }
        Ok(())
    }

    /// `φ` for these parameters.
    pub fn phi(&self, z: f64) -> f64 {
        phi(z, self.lambda, self.coupons)
    }

    pub fn phi_prime(&self, z: f64) -> f64 {
        phi_prime(z, self.lambda, self.coupons)
    }

    /// Right-hand side with `a > 0`.
    pub fn drift(&self, t: f64, a: f64, b: f64) -> (f64, f64) {
        let f = self.phi(t + a);
        (f - 1.0, self.lambda * (1.0 - t - a - b) - f)
    }

    /// `db/dt` on the absorbed branch `a = 0`.
    pub fn absorbed_drift(&self, t: f64, b: f64) -> f64 {
        self.lambda * (1.0 - t - b) - self.phi(t)
    }

    /// One classical Runge–Kutta step of the unabsorbed system.
    pub fn rk4_step(&self, t: f64, a: f64, b: f64, h: f64) -> (f64, f64) {
        let k1 = self.drift(t, a, b);
        let k2 = self.drift(t + h / 2.0, a + h / 2.0 * k1.0, b + h / 2.0 * k1.1);
        let k3 = self.drift(t + h / 2.0, a + h / 2.0 * k2.0, b + h / 2.0 * k2.1);
        let k4 = self.drift(t + h, a + h * k3.0, b + h * k3.1);
        (
            a + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            b + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        )
    }

    fn rk4_absorbed(&self, t: f64, b: f64, h: f64) -> f64 {
        let k1 = self.absorbed_drift(t, b);
        let k2 = self.absorbed_drift(t + h / 2.0, b + h / 2.0 * k1);
        let k3 = self.absorbed_drift(t + h / 2.0, b + h / 2.0 * k2);
        let k4 = self.absorbed_drift(t + h, b + h * k3);
        b + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    }
}

/// Fluid path on a uniform grid over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FluidSolution {
    pub params: FluidParams,
    pub dt: f64,
    pub times: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Absorption time of `a`.
    pub t0: f64,
    /// `b` at `t0`.
    pub b_t0: f64,
    pub zc: Option<f64>,
}

/// Integrates the fluid system on `[0, 1]` with step `dt` (rounded so that
/// `1/dt` is an integer).
pub fn solve_fluid(fp: &FluidParams, dt: f64) -> Result<FluidSolution> {
    fp.validate()?;
    if !(dt > 0.0 && dt <= 1e-2) {
        return Err(Error::invalid(format!("dt={dt} must lie in (0, 1e-2]")));
    }
    let steps = (1.0 / dt).round() as usize;
    let dt = 1.0 / steps as f64;
    let grid_t = |i: usize| i as f64 / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut a_vals = Vec::with_capacity(steps + 1);
    let mut b_vals = Vec::with_capacity(steps + 1);
    let (mut a, mut b) = (fp.a0, 0.0);
    times.push(0.0);
    a_vals.push(a);
    b_vals.push(b);
    let mut absorbed: Option<(f64, f64)> = None;
    for i in 0..steps {
        let t = grid_t(i);
        let t_next = grid_t(i + 1);
        if absorbed.is_none() {
            let (a1, b1) = fp.rk4_step(t, a, b, dt);
            if a1 > 0.0 {
                a = a1;
                b = b1;
            } else {
                // a crosses zero inside this step: bisect on the step length.
                let (mut lo, mut hi) = (0.0, dt);
                while hi - lo > EVENT_TOL {
                    let mid = 0.5 * (lo + hi);
                    if fp.rk4_step(t, a, b, mid).0 > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let h = 0.5 * (lo + hi);
                let t0 = t + h;
                let b_t0 = fp.rk4_step(t, a, b, h).1;
                absorbed = Some((t0, b_t0));
                a = 0.0;
                b = fp.rk4_absorbed(t0, b_t0, t_next - t0);
            }
        } else {
            b = fp.rk4_absorbed(t, b, dt);
        }
        times.push(t_next);
        a_vals.push(a);
        b_vals.push(b);
    }
    let (t0, b_t0) = absorbed.unwrap_or((1.0, b));
    Ok(FluidSolution {
        params: *fp,
        dt,
        times,
        a: a_vals,
        b: b_vals,
        t0,
        b_t0,
        zc: find_zc(fp.lambda, fp.coupons),
    })
}

impl FluidSolution {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the last grid point with `t <= t0`.
    pub fn last_index_before_t0(&self) -> usize {
        ((self.t0 / self.dt).floor() as usize).min(self.len() - 1)
    }

    /// Linear interpolation of `(a_t, b_t)`; `(t0, 0, b_t0)` is used as an extra knot.
    pub fn at(&self, t: f64) -> (f64, f64) {
        let t = t.clamp(0.0, 1.0);
        let steps = self.len() - 1;
        let i = ((t / self.dt).floor() as usize).min(steps.saturating_sub(1));
        let (t_l, t_r) = (self.times[i], self.times[i + 1]);
        let (mut left, mut right) = ((t_l, self.a[i], self.b[i]), (t_r, self.a[i + 1], self.b[i + 1]));
        if t_l < self.t0 && self.t0 < t_r {
            let knot = (self.t0, 0.0, self.b_t0);
            if t <= self.t0 {
                right = knot;
            } else {
                left = knot;
            }
        }
        let w = if right.0 > left.0 { (t - left.0) / (right.0 - left.0) } else { 0.0 };
        let a = if t >= self.t0 { 0.0 } else { left.1 + w * (right.1 - left.1) };
        (a, left.2 + w * (right.2 - left.2))
    }

    /// `t + a_t + b_t` on the grid.
    pub fn explored(&self) -> Vec<f64> {
        self.times
            .iter()
            .zip(self.a.iter().zip(&self.b))
            .map(|(t, (a, b))| t + a + b)
            .collect()
    }

    pub fn summary_line(&self) -> String {
        match self.zc {
            Some(z) => format!("t0={:.6},zc={:.6}", self.t0, z),
            None => format!("t0={:.6},zc=none", self.t0),
        }
    }

    pub fn write_csv(&self, path: &Path, comments: &[String]) -> Result<()> {
        let mut w = CsvWriter::create(path, comments, "t,a,b")?;
        for i in 0..self.len() {
            w.line(format_args!("{},{},{}", self.times[i], self.a[i], self.b[i]))?;
        }
        w.finish()
    }
}
