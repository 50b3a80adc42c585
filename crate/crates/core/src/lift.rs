//! Path lifting along segments and preimage-collision certificates.
//!
//! For a map with `f(0) = 0`, take the image `K = f([0, a])` of a segment,
//! build a right inverse `g` on `K` with `g(0) = 0` by warm-started
//! continuation, and measure how far `g(f(t a))` strays from `t a`. If `f` is
//! injective the two agree for every `t`; if the image path returns to a point
//! it already visited, `g` (a function on `K`) must reuse its earlier value and
//! the lift breaks.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::descent::{solve_pointwise, DescentConfig, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{distance, norm2, sub, DenseMatrix};
use crate::maps::DifferentiableMap;
use crate::right_inverse::{anchor_tolerance, Anchor, CompactSample};

pub const DEFAULT_TOL_LIFT: f64 = 1e-6;
pub const DEFAULT_SEGMENT_SAMPLES: usize = 50;

/// `h(x) = f(b - x) - f(b)`, which fixes the origin: `h(0) = 0`.
#[derive(Debug, Clone)]
pub struct NormalizedMap<M> {
    inner: M,
    base: Vec<f64>,
    base_value: Vec<f64>,
}

impl<M: DifferentiableMap> NormalizedMap<M> {
    pub fn new(inner: M, base: &[f64]) -> Result<Self> {
        let base_value = inner.evaluate(base)?;
        Ok(Self { inner, base: base.to_vec(), base_value })
    }

    fn reflect(&self, x: &[f64]) -> Vec<f64> {
        sub(&self.base, x)
    }
}

impl<M: DifferentiableMap> DifferentiableMap for NormalizedMap<M> {
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn value(&self, x: &[f64]) -> Vec<f64> {
        sub(&self.inner.value(&self.reflect(x)), &self.base_value)
    }

    fn derivative(&self, x: &[f64]) -> DenseMatrix {
        self.inner.derivative(&self.reflect(x)).scaled(-1.0)
    }

    fn known_inverse_bound(&self) -> Option<f64> {
        self.inner.known_inverse_bound()
    }

    fn linearization_remainder(&self, x: &[f64], h: &[f64], t: f64) -> Vec<f64> {
        let neg: Vec<f64> = h.iter().map(|v| -v).collect();
        self.inner.linearization_remainder(&self.reflect(x), &neg, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ConsistentWithInjectivity,
    DistinctPreimagesDetected,
    Inconclusive,
}

/// Lift errors `||g(f(t_j a)) - t_j a||` along the grid `t_j = j / (m - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub t_grid: Vec<f64>,
    /// One entry per grid point reached; shorter than `t_grid` after a failure.
    pub lift_errors: Vec<f64>,
    /// Largest grid parameter up to which every lift error is within tolerance.
    pub t_bar: f64,
    pub verdict: Verdict,
    /// Grid index and status of the continuation solve that failed, if any.
    pub failed_at: Option<(usize, SolveStatus)>,
}

#[derive(Serialize, Deserialize)]
struct LiftRow {
    t: f64,
    lift_error: f64,
}

#[derive(Serialize)]
struct LiftSummary {
    t_bar: f64,
    verdict: Verdict,
}

pub const LIFT_CSV_HEADER: &str = "t,lift_error";

impl LiftReport {
    pub fn terminal_error(&self) -> Option<f64> {
        self.lift_errors.last().copied()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        for (&t, &lift_error) in self.t_grid.iter().zip(&self.lift_errors) {
            out.serialize(LiftRow { t, lift_error })?;
        }
        if self.lift_errors.is_empty() {
            out.write_record(LIFT_CSV_HEADER.split(','))?;
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv_rows<R: std::io::Read>(reader: R) -> Result<Vec<(f64, f64)>> {
        csv::Reader::from_reader(reader)
            .deserialize::<LiftRow>()
            .map(|r| r.map(|r| (r.t, r.lift_error)).map_err(Error::from))
            .collect()
    }

    /// `{"t_bar": ..., "verdict": "..."}`
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&LiftSummary { t_bar: self.t_bar, verdict: self.verdict })?)
    }
}

/// Grid parameters `j / (m - 1)`, ending exactly at 1.
fn segment_grid(m: usize) -> Vec<f64> {
    (0..m).map(|j| j as f64 / (m - 1) as f64).collect()
}

/// Samples `K = f([0, a])` at `m` evenly spaced parameters. Anchored at
/// `g(y_0) = 0` when `f(0)` vanishes to within `1e-12`.
pub fn sample_segment_image<M: DifferentiableMap + ?Sized>(map: &M, a: &[f64], m: usize) -> Result<CompactSample> {
    map.check_dimension(a)?;
    if m < 2 {
        return Err(Error::InvalidArgument(format!("segment sample needs m >= 2, got {m}")));
    }
    let targets: Vec<Vec<f64>> = segment_grid(m)
        .into_iter()
        .map(|t| map.value(&a.iter().map(|v| t * v).collect::<Vec<_>>()))
        .collect();
    if norm2(&targets[0]) <= 1e-12 {
        let anchor = Anchor { index: 0, point: vec![0.0; a.len()] };
        CompactSample::anchored(map, targets, anchor)
    } else {
        CompactSample::new(targets)
    }
}

/// Lifts the image path `t ↦ f(t a)` through the anchored right inverse.
///
/// Requires `||f(0)|| <= 1e-12`. A target that coincides with an earlier one
/// reuses that point's value of `g`; every other target is solved by Newton
/// descent warm-started from the previous lift point.
pub fn lift_analysis<M: DifferentiableMap + ?Sized>(
    map: &M,
    a: &[f64],
    m: usize,
    config: &DescentConfig,
    tol_lift: f64,
) -> Result<LiftReport> {
    map.check_dimension(a)?;
    let origin = vec![0.0; a.len()];
    let f0 = norm2(&map.value(&origin));
    if !(f0 <= 1e-12) {
        return Err(Error::InvalidArgument(format!("lift analysis needs f(0) = 0, got |f(0)| = {f0:e}")));
    }
    if !(tol_lift > 0.0) {
        return Err(Error::InvalidArgument("tol_lift must be positive".into()));
    }
    config.validate()?;
    let sample = sample_segment_image(map, a, m)?;
    let targets = sample.targets();
    let t_grid = segment_grid(m);

    let mut lifted: Vec<Vec<f64>> = vec![origin];
    let mut failed_at = None;
    for j in 1..m {
        let y = &targets[j];
        let earlier = (0..j).find(|&i| distance(y, &targets[i]) <= anchor_tolerance(&targets[i]));
        let next = match earlier {
            Some(i) => lifted[i].clone(),
            None => {
                let report = solve_pointwise(map, y, &lifted[j - 1], config)?;
                if report.status != SolveStatus::Converged {
                    failed_at = Some((j, report.status));
                    break;
                }
                report.solution
            }
        };
        lifted.push(next);
    }

    let lift_errors: Vec<f64> = lifted
        .iter()
        .zip(&t_grid)
        .map(|(g, &t)| distance(g, &a.iter().map(|v| t * v).collect::<Vec<_>>()))
        .collect();
    let good = lift_errors.iter().take_while(|&&e| e <= tol_lift).count();
    let t_bar = if good == 0 { 0.0 } else { t_grid[good - 1] };

    let verdict = if failed_at.is_some() {
        Verdict::Inconclusive
    } else if t_bar == 1.0 {
        Verdict::ConsistentWithInjectivity
    } else if lift_errors.last().is_some_and(|&e| e > 100.0 * tol_lift) {
        Verdict::DistinctPreimagesDetected
    } else {
        Verdict::Inconclusive
    };
    Ok(LiftReport { t_grid, lift_errors, t_bar, verdict, failed_at })
}

/// Checks whether a numerical collision `f(a) ≈ f(b)` forces `a ≈ b`.
///
/// Lifts along `a' = b - a` for `h(x) = f(b - x) - f(b)`. A consistent lift
/// certifies `a ≈ b` only when `||a'|| <= tol_lift`; otherwise the report is
/// downgraded to `Inconclusive`.
pub fn certify_pair<M: DifferentiableMap + ?Sized>(
    map: &M,
    a: &[f64],
    b: &[f64],
    m: usize,
    config: &DescentConfig,
    tol_lift: f64,
) -> Result<LiftReport> {
    map.check_dimension(a)?;
    map.check_dimension(b)?;
    let residual = distance(&map.value(a), &map.value(b));
    if !(residual <= config.tol_residual) {
        return Err(Error::NotACollision { residual });
    }
    let normalized = NormalizedMap::new(map, b)?;
    let offset = sub(b, a);
    let mut report = lift_analysis(&normalized, &offset, m, config, tol_lift)?;
    if report.verdict == Verdict::ConsistentWithInjectivity && norm2(&offset) > tol_lift {
        report.verdict = Verdict::Inconclusive;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::maps::MapInstance;
    use std::f64::consts::PI;

    #[test]
    fn cubic_segment_targets() {
        let f = MapInstance::cubic(1).unwrap();
        let s = sample_segment_image(&f, &[1.0], 3).unwrap();
        assert_eq!(s.targets(), &[vec![0.0], vec![0.625], vec![2.0]]);
        assert_eq!(s.anchor(), Some(&Anchor { index: 0, point: vec![0.0] }));
        assert!(sample_segment_image(&f, &[1.0], 1).is_err());
    }

    #[test]
    fn unanchored_when_origin_is_not_fixed() {
        let f = MapInstance::exp_spiral();
        let s = sample_segment_image(&f, &[1.0, 0.0], 2).unwrap();
        assert!(s.anchor().is_none());
        assert_eq!(s.targets()[0], vec![1.0, 0.0]);
    }

    #[test]
    fn normalized_exp_spiral_traces_the_unit_circle() {
        // h(x) = f(-x) - (1, 0); along t (0, -2π) that is (cos 2πt - 1, sin 2πt).
        let h = NormalizedMap::new(MapInstance::exp_spiral(), &[0.0, 0.0]).unwrap();
        let s = sample_segment_image(&h, &[0.0, -2.0 * PI], 5).unwrap();
        let expected = [(0.0, 0.0), (-1.0, 1.0), (-2.0, 0.0), (-1.0, -1.0), (0.0, 0.0)];
        for (y, (ex, ey)) in s.targets().iter().zip(expected) {
            assert!((y[0] - ex).abs() < 1e-15 && (y[1] - ey).abs() < 1e-15, "{y:?}");
        }
        assert!(s.anchor().is_some());
    }

    #[test]
    fn normalized_jacobian_matches_fd() {
        let h = NormalizedMap::new(MapInstance::coupled_sine(3, 0.5).unwrap(), &[0.2, -1.0, 0.7]).unwrap();
        let err = crate::maps::check_jacobian(&h, &[vec![0.3, 0.1, -2.0]], None).unwrap();
        assert!(err < 1e-8);
    }

    #[test]
    fn affine_lift_is_consistent() {
        let a = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![-1.0, 1.5]]).unwrap();
        let f = MapInstance::affine(a, vec![0.0, 0.0]).unwrap();
        let r = lift_analysis(&f, &[3.0, -4.0], 20, &DescentConfig::default(), DEFAULT_TOL_LIFT).unwrap();
        assert!(r.lift_errors.iter().all(|&e| e < 1e-10));
        assert_eq!(r.t_bar, 1.0);
        assert_eq!(r.verdict, Verdict::ConsistentWithInjectivity);
    }

    #[test]
    fn exp_spiral_loop_breaks_the_lift() {
        let f = MapInstance::exp_spiral();
        let r = certify_pair(&f, &[0.0, 2.0 * PI], &[0.0, 0.0], 100, &DescentConfig::default(), DEFAULT_TOL_LIFT).unwrap();
        assert_eq!(r.verdict, Verdict::DistinctPreimagesDetected);
        assert!(r.t_bar < 1.0);
        assert!((r.terminal_error().unwrap() - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn lift_requires_fixed_origin() {
        let f = MapInstance::exp_spiral();
        assert!(lift_analysis(&f, &[1.0, 0.0], 5, &DescentConfig::default(), 1e-6).is_err());
    }

    #[test]
    fn identical_points_certify_trivially() {
        let f = MapInstance::sine_perturbed(2, 0.5).unwrap();
        let r = certify_pair(&f, &[1.0, 2.0], &[1.0, 2.0], 10, &DescentConfig::default(), 1e-6).unwrap();
        assert_eq!(r.verdict, Verdict::ConsistentWithInjectivity);
        assert!(r.lift_errors.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn non_collision_is_rejected() {
        let f = MapInstance::sine_perturbed(2, 0.5).unwrap();
        let err = certify_pair(&f, &[1.0, 2.0], &[0.0, 2.0], 10, &DescentConfig::default(), 1e-6).unwrap_err();
        assert!(matches!(err, Error::NotACollision { .. }));
    }

    #[test]
    fn lift_csv_and_summary() {
        let f = MapInstance::cubic(1).unwrap();
        let r = lift_analysis(&f, &[1.5], 4, &DescentConfig::default(), 1e-6).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("t,lift_error\n"));
        let rows = LiftReport::read_csv_rows(buf.as_slice()).unwrap();
        let expect: Vec<(f64, f64)> = r.t_grid.iter().copied().zip(r.lift_errors.iter().copied()).collect();
        assert_eq!(rows, expect);
        let v: serde_json::Value = serde_json::from_str(&r.summary_json().unwrap()).unwrap();
        assert_eq!(v["verdict"], "ConsistentWithInjectivity");
        assert_eq!(v["t_bar"], 1.0);
    }
}
