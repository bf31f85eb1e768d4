//! Exact binomial variates and probability masses.
//!
//! Small means (`n * min(p, 1 - p) < 30`) are drawn by sequential inversion of
//! the CDF. Larger means go through the BTPE rejection sampler of `rand_distr`.

use rand::Rng;

const INVERSION_MEAN_LIMIT: f64 = 30.0;

/// `Binomial(n, p)`.
#[derive(Debug, Clone, Copy)]
pub struct Binomial {
    n: u64,
    p: f64,
}

impl Binomial {
    /// `p` is clamped into `[0, 1]`; callers validate upstream.
    pub fn new(n: u64, p: f64) -> Self {
        Binomial { n, p: p.clamp(0.0, 1.0) }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.n == 0 || self.p == 0.0 {
            return 0;
        }
        if self.p == 1.0 {
            return self.n;
        }
        let flipped = self.p > 0.5;
        let p = if flipped { 1.0 - self.p } else { self.p };
        let x = if (self.n as f64) * p < INVERSION_MEAN_LIMIT {
            invert(self.n, p, rng)
        } else {
            let dist = rand_distr::Binomial::new(self.n, p).expect("p checked in (0, 0.5]");
            rng.sample(dist)
        };
        if flipped {
            self.n - x
        } else {
            x
        }
    }
}

// Sequential search from k = 0; expected cost O(n p).
fn invert<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    let q = 1.0 - p;
    let odds = p / q;
    let mut mass = q.powf(n as f64);
    let mut u: f64 = rng.random();
    let mut k = 0u64;
    while u > mass && k < n {
        u -= mass;
        k += 1;
        mass *= odds * (n - k + 1) as f64 / k as f64;
    }
    k
}

/// `P(X = k)` for `k = 0..=min(kmax, n)`, `X ~ Binomial(n, p)`.
pub fn pmf_prefix(n: u64, p: f64, kmax: u64) -> Vec<f64> {
    let top = kmax.min(n);
    let mut out = Vec::with_capacity(top as usize + 1);
    if p <= 0.0 {
        out.push(1.0);
        out.resize(top as usize + 1, 0.0);
        return out;
    }
    if p >= 1.0 {
        out.resize(top as usize + 1, 0.0);
        if top == n {
            out[n as usize] = 1.0;
        }
        return out;
    }
    let q = 1.0 - p;
    let log_q0 = n as f64 * q.ln();
    if log_q0 > -700.0 {
        let odds = p / q;
        let mut mass = q.powf(n as f64);
        out.push(mass);
        for k in 1..=top {
            mass *= odds * (n - k + 1) as f64 / k as f64;
            out.push(mass);
        }
    } else {
        let log_odds = (p / q).ln();
        let mut log_mass = log_q0;
        out.push(log_mass.exp());
        for k in 1..=top {
            log_mass += log_odds + ((n - k + 1) as f64 / k as f64).ln();
            out.push(log_mass.exp());
        }
    }
    out
}

/// Full mass function of `Binomial(n, p)`.
pub fn pmf_all(n: u64, p: f64) -> Vec<f64> {
    pmf_prefix(n, p, n)
}
