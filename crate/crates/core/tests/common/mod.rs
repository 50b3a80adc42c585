#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bisection for an increasing scalar function on `[lo, hi]`.
pub fn bisect(phi: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64, steps: usize) -> f64 {
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if phi(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Componentwise inverse of a diagonal map given by its scalar profile.
pub fn diagonal_inverse(phi: impl Fn(f64) -> f64 + Copy, y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| bisect(phi, v, -1e6, 1e6, 200)).collect()
}

pub fn seeded_box(n: usize, lo: f64, hi: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| rng.random_range(lo..hi)).collect()).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
