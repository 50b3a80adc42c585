//! Fixtures shared by the criterion benchmarks.

use hadamard_core::{CompactSample, DenseMatrix, MapInstance};

/// Deterministic targets on a Lissajous-like curve in `[-r, r]^n`.
pub fn curve_targets(n: usize, count: usize, r: f64) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let s = i as f64 / count.max(1) as f64;
            (0..n).map(|j| r * (2.0 * std::f64::consts::PI * s * (j + 1) as f64 + j as f64).sin()).collect()
        })
        .collect()
}

pub fn curve_sample(n: usize, count: usize, r: f64) -> CompactSample {
    CompactSample::new(curve_targets(n, count, r)).expect("nonempty sample")
}

/// Diagonally dominant test matrix of size `n`.
pub fn dominant_matrix(n: usize) -> DenseMatrix {
    let mut a = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = ((i * 31 + j * 17) % 13) as f64 / 13.0 - 0.5;
        }
        a[(i, i)] = n as f64;
    }
    a
}

pub fn sine(n: usize) -> MapInstance {
    MapInstance::sine_perturbed(n, 0.5).expect("valid sine map")
}
