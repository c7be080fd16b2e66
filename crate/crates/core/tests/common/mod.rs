//! Shared helpers for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

/// Two-sided threshold `z` such that `k` simultaneous normal comparisons
/// all pass with probability at least `1 - alpha` (Bonferroni).
///
/// Uses the Mills bound `P(|Z| > z) <= 2 φ(z) / z`, so the result is
/// slightly conservative.
pub fn family_z(alpha: f64, k: usize) -> f64 {
    let target = alpha / k as f64;
    let tail = |z: f64| 2.0 * (-z * z / 2.0).exp() / ((2.0 * PI).sqrt() * z);
    let (mut lo, mut hi) = (1.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if tail(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// The usual 3σ level, `P(|Z| > 3)`.
pub const THREE_SIGMA_ALPHA: f64 = 0.0027;

/// `|count − n·p| ≤ z·sqrt(n·p·(1−p))`.
pub fn binomial_ok(count: u64, n: u64, p: f64, z: f64) -> bool {
    let mean = n as f64 * p;
    let sd = (n as f64 * p * (1.0 - p)).sqrt();
    (count as f64 - mean).abs() <= z * sd.max(1e-300)
}
