//! Reference computations kept independent of the library code paths.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rds_core::ModelParams;

pub fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

pub fn binom_pmf(n: u64, k: u64, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p == 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let ln = ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln();
    ln.exp()
}

pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mean.ln() - mean - ln_factorial(k)).exp()
}

/// `E[g(Y)]` for `Y ~ Poisson(mean)`, summed to `k = 200`.
pub fn poisson_expect(mean: f64, g: impl Fn(f64) -> f64) -> f64 {
    (0..=200u64).map(|k| poisson_pmf(k, mean) * g(k as f64)).sum()
}

/// Next-state law from `(n, a, b)` by summing over every `(h, k)` pair.
///
/// The interviewee leaves the holder pool when `a >= 1`; otherwise it is a
/// fresh seed taken from the unexplored pool, or from the named pool when no
/// unexplored individual is left.
pub fn enumerate_next(n: usize, a: usize, b: usize, params: &ModelParams) -> BTreeMap<(usize, usize), f64> {
    let big_n = params.population;
    let p = params.lambda / big_n as f64;
    let unexplored_now = big_n - n - a - b;
    let (holders, named, unexplored) = if a >= 1 {
        (a - 1, b, unexplored_now)
    } else if unexplored_now >= 1 {
        (0, b, unexplored_now - 1)
    } else {
        (0, b - 1, 0)
    };
    let mut out = BTreeMap::new();
    for h in 0..=unexplored {
        for k in 0..=named {
            let mass = binom_pmf(unexplored as u64, h as u64, p) * binom_pmf(named as u64, k as u64, p);
            let given = (h + k).min(params.coupons);
            *out.entry((holders + given, named + h - given)).or_insert(0.0) += mass;
        }
    }
    out
}

/// Every `(n, a, b)` with `n < N` and `n + a + b <= N`.
pub fn all_states(big_n: usize) -> Vec<(usize, usize, usize)> {
    let mut v = Vec::new();
    for n in 0..big_n {
        for a in 0..=big_n - n {
            for b in 0..=big_n - n - a {
                v.push((n, a, b));
            }
        }
    }
    v
}

/// Forward reachability of `A` from `A_m = ell` with 0 absorbing; supports
/// of the one-step law are taken as `a-1 ..= a-1+min(c, pool)`.
pub fn bfs_reachable(m: usize, ell: usize, params: &ModelParams, n0: Option<usize>) -> usize {
    let big_n = params.population;
    let last = n0.unwrap_or(big_n);
    let keep = |n: usize, a: usize| n0.is_none_or(|t| a + n <= t);
    let mut layer: BTreeSet<usize> = [ell].into_iter().filter(|&a| keep(m, a)).collect();
    let mut total = layer.len();
    for n in m..last {
        let mut next = BTreeSet::new();
        for &a in &layer {
            if a == 0 {
                next.insert(0);
                continue;
            }
            let base = a - 1;
            let pool = big_n - (n + 1) - base;
            for g in 0..=params.coupons.min(pool) {
                next.insert(base + g);
            }
        }
        layer = next.into_iter().filter(|&a| keep(n + 1, a)).collect();
        total += layer.len();
    }
    total
}

/// Adaptive Simpson quadrature.
pub fn simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(lo), f(hi), f(0.5 * (lo + hi)));
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, lo, hi, fa, fm, fb, whole, tol, 50)
}

/// Root of an increasing function on `[lo, hi]`.
pub fn bisect_increasing(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Two-sample χ² statistic over the union of observed categories;
/// returns `(statistic, degrees of freedom)`.
pub fn two_sample_chi2<K: Ord + Clone>(x: &BTreeMap<K, u64>, y: &BTreeMap<K, u64>) -> (f64, usize) {
    let nx: u64 = x.values().sum();
    let ny: u64 = y.values().sum();
    let kx = (ny as f64 / nx as f64).sqrt();
    let ky = (nx as f64 / ny as f64).sqrt();
    let keys: BTreeSet<K> = x.keys().chain(y.keys()).cloned().collect();
    let mut stat = 0.0;
    for key in &keys {
        let r = *x.get(key).unwrap_or(&0) as f64;
        let s = *y.get(key).unwrap_or(&0) as f64;
        stat += (kx * r - ky * s).powi(2) / (r + s);
    }
    (stat, keys.len() - 1)
}

/// Pools categories with fewer than `min` total counts into one bucket.
pub fn pool_sparse<K: Ord + Clone>(
    x: &BTreeMap<K, u64>,
    y: &BTreeMap<K, u64>,
    min: u64,
) -> (BTreeMap<Option<K>, u64>, BTreeMap<Option<K>, u64>) {
    let keys: BTreeSet<K> = x.keys().chain(y.keys()).cloned().collect();
    let (mut px, mut py) = (BTreeMap::new(), BTreeMap::new());
    for key in keys {
        let r = *x.get(&key).unwrap_or(&0);
        let s = *y.get(&key).unwrap_or(&0);
        let slot = if r + s >= min { Some(key) } else { None };
        *px.entry(slot.clone()).or_insert(0) += r;
        *py.entry(slot).or_insert(0) += s;
    }
    (px, py)
}
