//! Finite-difference Jacobian checks and empirical estimates of the
//! linearization modulus α(t) and the inverse bound M.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::DifferentiableMap;
use crate::error::{Error, Result};
use crate::linalg::{inverse_spectral_norm, norm2, DenseMatrix};

pub const DEFAULT_DIRECTION_SEED: u64 = 42;

/// Default central-difference step `1e-6 · (1 + ||x||)`.
pub fn default_fd_step(x: &[f64]) -> f64 {
    1e-6 * (1.0 + norm2(x))
}

/// Central-difference Jacobian; column `j` is `(f(x + h e_j) - f(x - h e_j)) / 2h`.
pub fn jacobian_fd<M: DifferentiableMap + ?Sized>(map: &M, x: &[f64], h: f64) -> Result<DenseMatrix> {
    map.check_dimension(x)?;
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    let n = x.len();
    let mut jac = DenseMatrix::zeros(n, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        probe[j] = x[j] + h;
        let plus = map.value(&probe);
        probe[j] = x[j] - h;
        let minus = map.value(&probe);
        probe[j] = x[j];
        let col: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h)).collect();
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Largest `||J - J_fd||_F / (1 + ||J||_F)` over the samples.
///
/// `h = None` uses [`default_fd_step`] at every sample.
pub fn check_jacobian<M: DifferentiableMap + ?Sized>(
    map: &M,
    samples: &[Vec<f64>],
    h: Option<f64>,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut worst: f64 = 0.0;
    for x in samples {
        let analytic = map.jacobian(x)?;
        let fd = jacobian_fd(map, x, h.unwrap_or_else(|| default_fd_step(x)))?;
        let err = analytic.sub(&fd).frobenius_norm() / (1.0 + analytic.frobenius_norm());
        worst = worst.max(err);
    }
    Ok(worst)
}

/// Table of `α(t)`: the normalized first-order remainder, maximized over a
/// sampled compact set and sampled directions in the ball of radius `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationEstimate {
    pub t_values: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub sample_count: usize,
    pub radius: f64,
}

impl LinearizationEstimate {
    /// True when α does not increase as `t` decreases, up to `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.alpha_values.windows(2).all(|w| w[1] <= w[0] + slack)
    }
}

/// Estimates `α(t) = sup ||f(x + t h) - f(x) - t f'(x) h|| / t` over
/// `x ∈ k_sample` and directions `h` with `||h|| <= radius`.
///
/// Directions are the `n` coordinate vectors plus `directions_per_point`
/// seeded random unit vectors, all scaled to `radius`.
pub fn linearization_modulus<M: DifferentiableMap + ?Sized>(
    map: &M,
    k_sample: &[Vec<f64>],
    radius: f64,
    t_values: &[f64],
    directions_per_point: usize,
    seed: u64,
) -> Result<LinearizationEstimate> {
    if k_sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    if t_values.iter().any(|&t| !(t > 0.0)) || t_values.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::InvalidArgument("t values must be positive and sorted descending".into()));
    }
    let n = map.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut alpha = vec![0.0_f64; t_values.len()];

    for x in k_sample {
        map.check_dimension(x)?;
        let mut directions: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = radius;
                e
            })
            .collect();
        for _ in 0..directions_per_point {
            let mut d: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            let norm = norm2(&d);
            d.iter_mut().for_each(|v| *v *= radius / norm);
            directions.push(d);
        }
        for (slot, &t) in alpha.iter_mut().zip(t_values) {
            for h in &directions {
                let r = norm2(&map.linearization_remainder(x, h, t)) / t;
                *slot = slot.max(r);
            }
        }
    }
    Ok(LinearizationEstimate {
        t_values: t_values.to_vec(),
        alpha_values: alpha,
        sample_count: k_sample.len(),
        radius,
    })
}

/// Largest `||[f'(x)]^{-1}||₂` over the samples.
pub fn estimate_inverse_bound<M: DifferentiableMap + ?Sized>(map: &M, samples: &[Vec<f64>]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut worst: f64 = 0.0;
    for (index, x) in samples.iter().enumerate() {
        let jac = map.jacobian(x)?;
        let norm = inverse_spectral_norm(&jac)
            .map_err(|_| Error::SingularJacobian { index, point: x.clone() })?;
        worst = worst.max(norm);
    }
    Ok(worst)
}

/// `count` points drawn uniformly from the box `[lo, hi]^n`.
pub fn uniform_box_samples(n: usize, lo: f64, hi: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| (0..n).map(|_| rng.random_range(lo..=hi)).collect()).collect()
}
