//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Exact `ln p(y_{1:T})` for `x_t = a x_{t-1} + N(0, q)`, `y_t = x_t + N(0, r)`,
/// `x_0 ~ N(0, p0)`, by the Kalman recursion.
pub fn kalman_log_evidence(a: f64, q: f64, r: f64, p0: f64, ys: &[f64]) -> f64 {
    let (mut mean, mut var) = (0.0, p0);
    let mut ll = 0.0;
    for &y in ys {
        mean *= a;
        var = a * a * var + q;
        let s = var + r;
        let innov = y - mean;
        ll += -0.5 * (2.0 * PI * s).ln() - 0.5 * innov * innov / s;
        let gain = var / s;
        mean += gain * innov;
        var *= 1.0 - gain;
    }
    ll
}

/// Root of `E - e sin E = M` on `[0, 2π]` by plain bisection.
pub fn bisect_kepler(m: f64, e: f64) -> f64 {
    let f = |x: f64| x - e * x.sin() - m;
    let (mut lo, mut hi) = (0.0f64, 2.0 * PI);
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

/// Mean and standard deviation with the `n - 1` denominator.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
