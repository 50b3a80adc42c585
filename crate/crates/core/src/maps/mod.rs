//! Built-in C¹ maps `ℝⁿ → ℝⁿ` with analytic Jacobians.
//!
//! Every solver in the crate is generic over [`DifferentiableMap`]; the
//! registry type [`MapInstance`] covers the fixed set of named maps that
//! configuration files can refer to.

mod diagnostics;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inverse_spectral_norm, DenseMatrix};

pub use diagnostics::{
    check_jacobian, default_fd_step, estimate_inverse_bound, jacobian_fd, linearization_modulus,
    uniform_box_samples, LinearizationEstimate, DEFAULT_DIRECTION_SEED,
};

/// Names accepted in [`MapSpec::name`].
pub const REGISTRY: &[&str] = &[
    "affine",
    "sine_perturbed",
    "coupled_sine",
    "cubic",
    "arctan_drift",
    "arctan_flat",
    "exp_spiral",
    "broken_jac",
];

/// A map `ℝⁿ → ℝⁿ` with a Jacobian.
///
/// Implementors provide the unchecked `value`/`derivative`; callers use the
/// dimension-checked [`evaluate`](Self::evaluate) and [`jacobian`](Self::jacobian).
pub trait DifferentiableMap: Send + Sync {
    fn dimension(&self) -> usize;

    /// `f(x)`; `x.len()` is assumed to equal `dimension()`.
    fn value(&self, x: &[f64]) -> Vec<f64>;

    /// `f'(x)` as an `n × n` matrix; `x.len()` is assumed to equal `dimension()`.
    fn derivative(&self, x: &[f64]) -> DenseMatrix;

    /// A uniform bound `M >= ||[f'(x)]^{-1}||₂` over all of `ℝⁿ`, when one is known.
    fn known_inverse_bound(&self) -> Option<f64> {
        None
    }

    /// `f(x + t h) - f(x) - t f'(x) h`.
    ///
    /// The default evaluates the expression as written. Implementations that
    /// know an exactly-linear part of `f` should drop it, since it cancels
    /// identically and only contributes rounding noise of order `eps / t`.
    fn linearization_remainder(&self, x: &[f64], h: &[f64], t: f64) -> Vec<f64> {
        let shifted: Vec<f64> = x.iter().zip(h).map(|(xi, hi)| xi + t * hi).collect();
        let f1 = self.value(&shifted);
        let f0 = self.value(x);
        let jh = self.derivative(x).mul_vec(h);
        f1.iter().zip(&f0).zip(&jh).map(|((a, b), c)| a - b - t * c).collect()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dimension(x)?;
        Ok(self.value(x))
    }

    fn jacobian(&self, x: &[f64]) -> Result<DenseMatrix> {
        self.check_dimension(x)?;
        Ok(self.derivative(x))
    }

    fn check_dimension(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.dimension() {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected: self.dimension(), actual: x.len() })
        }
    }
}

impl<M: DifferentiableMap + ?Sized> DifferentiableMap for &M {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn value(&self, x: &[f64]) -> Vec<f64> {
        (**self).value(x)
    }
    fn derivative(&self, x: &[f64]) -> DenseMatrix {
        (**self).derivative(x)
    }
    fn known_inverse_bound(&self) -> Option<f64> {
        (**self).known_inverse_bound()
    }
    fn linearization_remainder(&self, x: &[f64], h: &[f64], t: f64) -> Vec<f64> {
        (**self).linearization_remainder(x, h, t)
    }
}

/// A named map parameter: a scalar gain or a list such as a matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    List(Vec<f64>),
}

/// Serializable description of a registry map.
///
/// ```json
/// {"name": "affine", "dimension": 2,
///  "params": {"matrix": [2, 0, 0, 2], "offset": [1, 1]}}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub name: String,
    pub dimension: usize,
    #[serde(default)]
    pub params: BTreeMap<String, ParamValue>,
}

impl MapSpec {
    pub fn new(name: impl Into<String>, dimension: usize) -> Self {
        Self { name: name.into(), dimension, params: BTreeMap::new() }
    }

    pub fn with_scalar(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_owned(), ParamValue::Scalar(value));
        self
    }

    pub fn with_list(mut self, key: &str, values: Vec<f64>) -> Self {
        self.params.insert(key.to_owned(), ParamValue::List(values));
        self
    }

    fn invalid(&self, reason: impl Into<String>) -> Error {
        Error::InvalidParams { map: self.name.clone(), reason: reason.into() }
    }

    fn expect_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(self.invalid(format!("unexpected parameter `{k}`"))),
            None => Ok(()),
        }
    }

    fn scalar(&self, key: &str) -> Result<f64> {
        match self.params.get(key) {
            Some(ParamValue::Scalar(v)) if v.is_finite() => Ok(*v),
            Some(_) => Err(self.invalid(format!("`{key}` must be a finite number"))),
            None => Err(self.invalid(format!("missing parameter `{key}`"))),
        }
    }

    fn list(&self, key: &str, len: usize) -> Result<Vec<f64>> {
        match self.params.get(key) {
            Some(ParamValue::List(v)) if v.len() == len && v.iter().all(|x| x.is_finite()) => {
                Ok(v.clone())
            }
            Some(_) => Err(self.invalid(format!("`{key}` must be a list of {len} finite numbers"))),
            None => Err(self.invalid(format!("missing parameter `{key}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum MapKind {
    Affine { matrix: DenseMatrix, offset: Vec<f64> },
    SinePerturbed { k: f64 },
    /// `x + k Q sin(Q x)` with a fixed symmetric orthogonal `Q`.
    CoupledSine { k: f64, mixing: DenseMatrix },
    Cubic,
    ArctanDrift { a: f64 },
    ArctanFlat,
    ExpSpiral,
    /// `x + k sin x` paired with a deliberately wrong Jacobian.
    BrokenJac { k: f64 },
}

/// A validated registry map, optionally carrying a known bound `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapInstance {
    spec: MapSpec,
    kind: MapKind,
    known_inverse_bound: Option<f64>,
}

const BROKEN_JAC_GAIN: f64 = 0.5;

impl MapInstance {
    pub fn from_spec(spec: MapSpec) -> Result<Self> {
        let n = spec.dimension;
        if n == 0 {
            return Err(spec.invalid("dimension must be at least 1"));
        }
        let (kind, bound) = match spec.name.as_str() {
            "affine" => {
                spec.expect_keys(&["matrix", "offset"])?;
                let matrix = DenseMatrix::from_row_major(n, n, spec.list("matrix", n * n)?)?;
                let offset = spec.list("offset", n)?;
                let bound = inverse_spectral_norm(&matrix).ok();
                (MapKind::Affine { matrix, offset }, bound)
            }
            "sine_perturbed" | "coupled_sine" => {
                spec.expect_keys(&["k"])?;
                let k = spec.scalar("k")?;
                let bound = (k.abs() < 1.0).then(|| 1.0 / (1.0 - k.abs()));
                let kind = if spec.name == "sine_perturbed" {
                    MapKind::SinePerturbed { k }
                } else {
                    MapKind::CoupledSine { k, mixing: householder_mixing(n) }
                };
                (kind, bound)
            }
            "cubic" => {
                spec.expect_keys(&[])?;
                (MapKind::Cubic, Some(1.0))
            }
            "arctan_drift" => {
                spec.expect_keys(&["a"])?;
                let a = spec.scalar("a")?;
                if a <= 0.0 {
                    return Err(spec.invalid("`a` must be positive"));
                }
                (MapKind::ArctanDrift { a }, Some(1.0))
            }
            "arctan_flat" => {
                spec.expect_keys(&[])?;
                (MapKind::ArctanFlat, None)
            }
            "exp_spiral" => {
                spec.expect_keys(&[])?;
                if n != 2 {
                    return Err(spec.invalid("exp_spiral is defined only for dimension 2"));
                }
                (MapKind::ExpSpiral, None)
            }
            "broken_jac" => {
                spec.expect_keys(&[])?;
                (MapKind::BrokenJac { k: BROKEN_JAC_GAIN }, None)
            }
            other => return Err(Error::UnknownMap(other.to_owned())),
        };
        Ok(Self { spec, kind, known_inverse_bound: bound })
    }

    pub fn affine(matrix: DenseMatrix, offset: Vec<f64>) -> Result<Self> {
        let n = matrix.rows();
        let spec = MapSpec::new("affine", n)
            .with_list("matrix", matrix.as_slice().to_vec())
            .with_list("offset", offset);
        Self::from_spec(spec)
    }

    pub fn sine_perturbed(n: usize, k: f64) -> Result<Self> {
        Self::from_spec(MapSpec::new("sine_perturbed", n).with_scalar("k", k))
    }

    pub fn coupled_sine(n: usize, k: f64) -> Result<Self> {
        Self::from_spec(MapSpec::new("coupled_sine", n).with_scalar("k", k))
    }

    pub fn cubic(n: usize) -> Result<Self> {
        Self::from_spec(MapSpec::new("cubic", n))
    }

    pub fn arctan_drift(n: usize, a: f64) -> Result<Self> {
        Self::from_spec(MapSpec::new("arctan_drift", n).with_scalar("a", a))
    }

    pub fn arctan_flat(n: usize) -> Result<Self> {
        Self::from_spec(MapSpec::new("arctan_flat", n))
    }

    pub fn exp_spiral() -> Self {
        Self::from_spec(MapSpec::new("exp_spiral", 2)).expect("exp_spiral spec is valid")
    }

    pub fn broken_jac(n: usize) -> Result<Self> {
        Self::from_spec(MapSpec::new("broken_jac", n))
    }

    /// Overrides the bound `M`, e.g. with an analytically known value.
    pub fn with_known_inverse_bound(mut self, bound: Option<f64>) -> Self {
        self.known_inverse_bound = bound;
        self
    }

    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }
}

/// Householder reflection `I - 2 v v^T / (v^T v)` with `v = (1, 2, ..., n)`.
fn householder_mixing(n: usize) -> DenseMatrix {
    let v: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let mut q = DenseMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] -= 2.0 * v[i] * v[j] / vv;
        }
    }
    q
}

fn componentwise(x: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
    x.iter().map(|&v| f(v)).collect()
}

impl DifferentiableMap for MapInstance {
    fn dimension(&self) -> usize {
        self.spec.dimension
    }

    fn value(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            MapKind::Affine { matrix, offset } => {
                matrix.mul_vec(x).iter().zip(offset).map(|(ax, c)| ax + c).collect()
            }
            MapKind::SinePerturbed { k } | MapKind::BrokenJac { k } => {
                componentwise(x, |v| v + k * v.sin())
            }
            MapKind::CoupledSine { k, mixing } => {
                let s = componentwise(&mixing.mul_vec(x), f64::sin);
                x.iter().zip(mixing.mul_vec(&s)).map(|(xi, qs)| xi + k * qs).collect()
            }
            MapKind::Cubic => componentwise(x, |v| v * v * v + v),
            MapKind::ArctanDrift { a } => componentwise(x, |v| v + a * v.atan()),
            MapKind::ArctanFlat => componentwise(x, f64::atan),
            MapKind::ExpSpiral => {
                let r = x[0].exp();
                let (s, c) = x[1].sin_cos();
                vec![r * c, r * s]
            }
        }
    }

    fn derivative(&self, x: &[f64]) -> DenseMatrix {
        match &self.kind {
            MapKind::Affine { matrix, .. } => matrix.clone(),
            MapKind::SinePerturbed { k } => {
                DenseMatrix::from_diagonal(&componentwise(x, |v| 1.0 + k * v.cos()))
            }
            MapKind::CoupledSine { k, mixing } => {
                let c = componentwise(&mixing.mul_vec(x), f64::cos);
                let inner = mixing.matmul(&DenseMatrix::from_diagonal(&c)).matmul(mixing);
                DenseMatrix::identity(x.len()).add(&inner.scaled(*k))
            }
            MapKind::Cubic => DenseMatrix::from_diagonal(&componentwise(x, |v| 3.0 * v * v + 1.0)),
            MapKind::ArctanDrift { a } => {
                DenseMatrix::from_diagonal(&componentwise(x, |v| 1.0 + a / (1.0 + v * v)))
            }
            MapKind::ArctanFlat => {
                DenseMatrix::from_diagonal(&componentwise(x, |v| 1.0 / (1.0 + v * v)))
            }
            MapKind::ExpSpiral => {
                let r = x[0].exp();
                let (s, c) = x[1].sin_cos();
                DenseMatrix::from_rows(&[vec![r * c, -r * s], vec![r * s, r * c]])
                    .expect("2x2 jacobian")
            }
            // sin where cos belongs
            MapKind::BrokenJac { k } => {
                DenseMatrix::from_diagonal(&componentwise(x, |v| 1.0 + k * v.sin()))
            }
        }
    }

    fn known_inverse_bound(&self) -> Option<f64> {
        self.known_inverse_bound
    }

    fn linearization_remainder(&self, x: &[f64], h: &[f64], t: f64) -> Vec<f64> {
        let sine_rem = |v: f64, d: f64| (v + t * d).sin() - v.sin() - t * d * v.cos();
        let atan_rem = |v: f64, d: f64| (v + t * d).atan() - v.atan() - t * d / (1.0 + v * v);
        match &self.kind {
            MapKind::Affine { .. } => vec![0.0; x.len()],
            MapKind::SinePerturbed { k } => {
                x.iter().zip(h).map(|(&v, &d)| k * sine_rem(v, d)).collect()
            }
            MapKind::CoupledSine { k, mixing } => {
                let z = mixing.mul_vec(x);
                let dz = mixing.mul_vec(h);
                let r: Vec<f64> = z.iter().zip(&dz).map(|(&v, &d)| sine_rem(v, d)).collect();
                mixing.mul_vec(&r).iter().map(|v| k * v).collect()
            }
            MapKind::Cubic => x
                .iter()
                .zip(h)
                .map(|(&v, &d)| {
                    let s = t * d;
                    3.0 * v * s * s + s * s * s
                })
                .collect(),
            MapKind::ArctanDrift { a } => {
                x.iter().zip(h).map(|(&v, &d)| a * atan_rem(v, d)).collect()
            }
            MapKind::ArctanFlat => x.iter().zip(h).map(|(&v, &d)| atan_rem(v, d)).collect(),
            MapKind::ExpSpiral | MapKind::BrokenJac { .. } => {
                let shifted: Vec<f64> = x.iter().zip(h).map(|(xi, hi)| xi + t * hi).collect();
                let (f1, f0) = (self.value(&shifted), self.value(x));
                let jh = self.derivative(x).mul_vec(h);
                f1.iter().zip(&f0).zip(&jh).map(|((a, b), c)| a - b - t * c).collect()
            }
        }
    }
}
