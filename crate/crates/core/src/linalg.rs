//! Dense linear algebra: row-major matrices, LU with partial pivoting, and
//! spectral-norm estimation of inverses by power iteration.
//!
//! Sizes here are desk scale (n <= 64), so everything is a plain `Vec<f64>`.

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Relative pivot threshold: a pivot below `PIVOT_TOLERANCE * max|A|` is singular.
pub const PIVOT_TOLERANCE: f64 = 1e-14;
/// Relative stopping tolerance of the power iteration.
pub const POWER_TOLERANCE: f64 = 1e-10;
pub const POWER_MAX_ITERATIONS: usize = 500;

/// Dense real matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from row-major entries. Entries must be finite.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidArgument("matrix dimensions must be positive".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, actual: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flatten().copied().collect();
        Self::from_row_major(rows.len(), cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self[(i, j)] = v;
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Matrix-vector product. Panics on a length mismatch.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "mul_vec: length mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// Matrix product. Panics on a shape mismatch.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul: shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn scaled(&self, s: f64) -> DenseMatrix {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        self.add(&other.scaled(-1.0))
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.rows).map(|i| self.row(i)).collect();
        f.debug_struct("DenseMatrix").field("rows", &rows).finish()
    }
}

/// LU factors of `P A = L U`, with unit-diagonal `L` packed below the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LuFactors {
    lu: DenseMatrix,
    /// `perm[i]` is the row of `A` that ended up in row `i`.
    perm: Vec<usize>,
    sign: f64,
}

/// Factors a square matrix with partial pivoting.
pub fn lu_factor(a: &DenseMatrix) -> Result<LuFactors> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.rows(), actual: a.cols() });
    }
    let n = a.rows();
    let threshold = PIVOT_TOLERANCE * a.max_abs();
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;

    for k in 0..n {
        let (p, pivot) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(pivot >= threshold) || pivot == 0.0 {
            return Err(Error::SingularMatrix { column: k, pivot });
        }
        if p != k {
            for j in 0..n {
                lu.data.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let diag = lu[(k, k)];
        for i in k + 1..n {
            let factor = lu[(i, k)] / diag;
            lu[(i, k)] = factor;
            if factor != 0.0 {
                for j in k + 1..n {
                    lu[(i, j)] -= factor * lu[(k, j)];
                }
            }
        }
    }
    Ok(LuFactors { lu, perm, sign })
}

impl LuFactors {
    pub fn dimension(&self) -> usize {
        self.perm.len()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Sign of the row permutation, +1 or -1.
    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn lower(&self) -> DenseMatrix {
        let n = self.dimension();
        let mut l = DenseMatrix::identity(n);
        for i in 0..n {
            for j in 0..i {
                l[(i, j)] = self.lu[(i, j)];
            }
        }
        l
    }

    pub fn upper(&self) -> DenseMatrix {
        let n = self.dimension();
        let mut u = DenseMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                u[(i, j)] = self.lu[(i, j)];
            }
        }
        u
    }

    pub fn determinant(&self) -> f64 {
        (0..self.dimension()).fold(self.sign, |d, i| d * self.lu[(i, i)])
    }

    /// Rebuilds `A = P^T L U`.
    pub fn reconstruct(&self) -> DenseMatrix {
        let n = self.dimension();
        let lu = self.lower().matmul(&self.upper());
        let mut a = DenseMatrix::zeros(n, n);
        for (i, &src) in self.perm.iter().enumerate() {
            for j in 0..n {
                a[(src, j)] = lu[(i, j)];
            }
        }
        a
    }

    /// Solves `A x = b`. Panics on a length mismatch; see [`solve_linear`].
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dimension();
        assert_eq!(b.len(), n, "solve: length mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu.row(i)[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu.row(i)[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        x
    }

    /// Solves `A^T x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dimension();
        assert_eq!(b.len(), n, "solve_transpose: length mismatch");
        // A^T = U^T L^T P, so solve U^T z = b, L^T v = z, then x = P^T v.
        let mut z = b.to_vec();
        for i in 0..n {
            let s: f64 = (0..i).map(|k| self.lu[(k, i)] * z[k]).sum();
            z[i] = (z[i] - s) / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| self.lu[(k, i)] * z[k]).sum();
            z[i] -= s;
        }
        let mut x = vec![0.0; n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = z[i];
        }
        x
    }
}

/// Solves `A x = b` from precomputed factors.
pub fn solve_linear(lu: &LuFactors, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != lu.dimension() {
        return Err(Error::DimensionMismatch { expected: lu.dimension(), actual: b.len() });
    }
    Ok(lu.solve(b))
}

/// Spectral norm of `A^{-1}`, from power iteration on `A^{-T} A^{-1}`.
pub fn inverse_spectral_norm(a: &DenseMatrix) -> Result<f64> {
    let lu = lu_factor(a)?;
    Ok(inverse_spectral_norm_from_factors(&lu))
}

pub fn inverse_spectral_norm_from_factors(lu: &LuFactors) -> f64 {
    let n = lu.dimension();
    // Irrational offsets keep the start vector off any coordinate-aligned subspace.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (0.618_033_988_75 * (i + 1) as f64).fract()).collect();
    let start_norm = norm2(&v);
    scale_in_place(&mut v, 1.0 / start_norm);

    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERATIONS {
        let z = lu.solve(&v);
        let w = lu.solve_transpose(&z);
        let next = dot(&z, &z);
        let wn = norm2(&w);
        if wn == 0.0 || !wn.is_finite() {
            lambda = next;
            break;
        }
        v = w;
        scale_in_place(&mut v, 1.0 / wn);
        let converged = (next - lambda).abs() <= POWER_TOLERANCE * next;
        lambda = next;
        if converged {
            break;
        }
    }
    lambda.sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `x + t * w`, the single update formula used by every solver.
pub fn step_point(x: &[f64], w: &[f64], t: f64) -> Vec<f64> {
    x.iter().zip(w).map(|(xi, wi)| xi + t * wi).collect()
}

fn scale_in_place(v: &mut [f64], s: f64) {
    v.iter_mut().for_each(|x| *x *= s);
}
