//! Right inverses over a sampled compact set.
//!
//! The unknown is a whole field `g = (g(y_0), ..., g(y_{m-1}))` and the merit
//! is the sup residual `μ(g) = max_j ||f(g(y_j)) - y_j||`. A step moves every
//! point along its own Newton direction `w_j = [f'(g_j)]⁻¹(y_j - f(g_j))` with
//! one shared step length, `g_t = g + t w`, accepted by the same sufficient
//! decrease test as the pointwise solver.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descent::{
    descent_drive, direction_at, line_search, residual_norm, DescentConfig, DescentTrace,
    IterationRecord, Proposal, SolveStatus,
};
use crate::error::{Error, Result};
use crate::linalg::{norm2, step_point};
use crate::maps::DifferentiableMap;

/// Pins `g(y_index) = point`; requires `f(point) = y_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub index: usize,
    pub point: Vec<f64>,
}

/// A finite sample `y_0, ..., y_{m-1}` of a compact target set.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactSample {
    targets: Vec<Vec<f64>>,
    anchor: Option<Anchor>,
}

/// On-disk layout shared by [`CompactSample`] and [`RightInverseState`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleFile {
    pub targets: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_point: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_values: Option<Vec<Vec<f64>>>,
}

/// Anchor residual allowed at construction: `1e-12 (1 + ||y_anchor||)`.
pub fn anchor_tolerance(target: &[f64]) -> f64 {
    1e-12 * (1.0 + norm2(target))
}

impl CompactSample {
    pub fn new(targets: Vec<Vec<f64>>) -> Result<Self> {
        let n = match targets.first() {
            Some(t) if !t.is_empty() => t.len(),
            Some(_) => return Err(Error::InvalidArgument("targets must be nonempty vectors".into())),
            None => return Err(Error::EmptySample),
        };
        if let Some(bad) = targets.iter().find(|t| t.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, actual: bad.len() });
        }
        if targets.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("targets must be finite".into()));
        }
        Ok(Self { targets, anchor: None })
    }

    /// A sample whose value at `anchor.index` is pinned to `anchor.point`.
    pub fn anchored<M: DifferentiableMap + ?Sized>(
        map: &M,
        targets: Vec<Vec<f64>>,
        anchor: Anchor,
    ) -> Result<Self> {
        let mut sample = Self::new(targets)?;
        let target = sample.targets.get(anchor.index).ok_or_else(|| {
            Error::InvalidArgument(format!("anchor index {} out of range", anchor.index))
        })?;
        map.check_dimension(&anchor.point)?;
        map.check_dimension(target)?;
        let residual = residual_norm(map, &anchor.point, target);
        if !(residual <= anchor_tolerance(target)) {
            return Err(Error::AnchorMismatch { residual });
        }
        sample.anchor = Some(anchor);
        Ok(sample)
    }

    pub fn targets(&self) -> &[Vec<f64>] {
        &self.targets
    }

    pub fn anchor(&self) -> Option<&Anchor> {
        self.anchor.as_ref()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.targets[0].len()
    }

    fn is_anchor(&self, j: usize) -> bool {
        self.anchor.as_ref().is_some_and(|a| a.index == j)
    }

    pub fn to_file(&self) -> SampleFile {
        SampleFile {
            targets: self.targets.clone(),
            anchor_index: self.anchor.as_ref().map(|a| a.index),
            anchor_point: self.anchor.as_ref().map(|a| a.point.clone()),
            g_values: None,
        }
    }

    /// Rebuilds a sample from its file form, re-checking the anchor against `map`.
    pub fn from_file<M: DifferentiableMap + ?Sized>(map: &M, file: &SampleFile) -> Result<Self> {
        match (file.anchor_index, &file.anchor_point) {
            (Some(index), Some(point)) => {
                Self::anchored(map, file.targets.clone(), Anchor { index, point: point.clone() })
            }
            (None, None) => Self::new(file.targets.clone()),
            _ => Err(Error::InvalidArgument(
                "anchor_index and anchor_point must be given together".into(),
            )),
        }
    }
}

/// A candidate right inverse sampled on `K`, with its cached merit.
#[derive(Debug, Clone, PartialEq)]
pub struct RightInverseState {
    sample: CompactSample,
    g_values: Vec<Vec<f64>>,
    merit: f64,
}

impl RightInverseState {
    pub fn new<M: DifferentiableMap + ?Sized>(
        map: &M,
        sample: CompactSample,
        g_values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if g_values.len() != sample.len() {
            return Err(Error::DimensionMismatch { expected: sample.len(), actual: g_values.len() });
        }
        for (y, g) in sample.targets.iter().zip(&g_values) {
            map.check_dimension(y)?;
            map.check_dimension(g)?;
        }
        if let Some(anchor) = &sample.anchor {
            if g_values[anchor.index] != anchor.point {
                return Err(Error::InvalidArgument(format!(
                    "initial value at anchor index {} differs from the anchor point",
                    anchor.index
                )));
            }
        }
        let merit = sup_residual(map, &sample, &g_values);
        Ok(Self { sample, g_values, merit })
    }

    /// Zero initial field, with the anchor value filled in when present.
    pub fn zeros<M: DifferentiableMap + ?Sized>(map: &M, sample: CompactSample) -> Result<Self> {
        let g = initial_field(&sample, map.dimension());
        Self::new(map, sample, g)
    }

    pub fn sample(&self) -> &CompactSample {
        &self.sample
    }

    pub fn g_values(&self) -> &[Vec<f64>] {
        &self.g_values
    }

    pub fn merit(&self) -> f64 {
        self.merit
    }

    pub fn recompute_merit<M: DifferentiableMap + ?Sized>(&self, map: &M) -> f64 {
        sup_residual(map, &self.sample, &self.g_values)
    }

    pub fn to_file(&self) -> SampleFile {
        SampleFile { g_values: Some(self.g_values.clone()), ..self.sample.to_file() }
    }

    pub fn from_file<M: DifferentiableMap + ?Sized>(map: &M, file: &SampleFile) -> Result<Self> {
        let sample = CompactSample::from_file(map, file)?;
        match &file.g_values {
            Some(g) => Self::new(map, sample, g.clone()),
            None => Self::zeros(map, sample),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file())?)
    }
}

/// Zero field with the anchor point substituted at the anchor index.
pub fn initial_field(sample: &CompactSample, n: usize) -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0; n]; sample.len()];
    if let Some(anchor) = &sample.anchor {
        g[anchor.index] = anchor.point.clone();
    }
    g
}

/// Max that propagates NaN, so a blown-up candidate is never accepted.
fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

fn sup_residual<M: DifferentiableMap + ?Sized>(map: &M, sample: &CompactSample, g: &[Vec<f64>]) -> f64 {
    sample
        .targets
        .par_iter()
        .zip(g)
        .map(|(y, x)| residual_norm(map, x, y))
        .reduce(|| 0.0, nan_max)
}

/// Newton directions at every sample point; zero at the anchor.
fn directions<M: DifferentiableMap + ?Sized>(
    map: &M,
    sample: &CompactSample,
    g: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let results: Vec<Result<Vec<f64>>> = (0..sample.len())
        .into_par_iter()
        .map(|j| {
            if sample.is_anchor(j) {
                Ok(vec![0.0; g[j].len()])
            } else {
                direction_at(map, &g[j], &sample.targets[j], j)
            }
        })
        .collect();
    // first failure in index order keeps the error deterministic
    results.into_iter().collect()
}

fn advance(sample: &CompactSample, g: &[Vec<f64>], w: &[Vec<f64>], steps: &[f64]) -> Vec<Vec<f64>> {
    g.iter()
        .zip(w)
        .zip(steps)
        .enumerate()
        .map(|(j, ((x, wj), &t))| if sample.is_anchor(j) { x.clone() } else { step_point(x, wj, t) })
        .collect()
}

fn functional_proposal<M: DifferentiableMap + ?Sized>(
    map: &M,
    sample: &CompactSample,
    g: &[Vec<f64>],
    merit: f64,
    config: &DescentConfig,
) -> Result<Proposal<Vec<Vec<f64>>>> {
    let w = directions(map, sample, g)?;
    let w_norms: Vec<f64> = w.iter().map(|wj| norm2(wj)).collect();
    let m = sample.len();

    if config.per_point_steps {
        return per_point_proposal(map, sample, g, &w, &w_norms, merit, config);
    }

    let merit_at = |t: f64| {
        sample
            .targets
            .par_iter()
            .zip(g.par_iter().zip(&w))
            .enumerate()
            .map(|(j, (y, (x, wj)))| {
                if sample.is_anchor(j) {
                    residual_norm(map, x, y)
                } else {
                    residual_norm(map, &step_point(x, wj, t), y)
                }
            })
            .reduce(|| 0.0, nan_max)
    };
    let ls = line_search(merit_at, merit, config)?;
    let max_w = w_norms.iter().copied().fold(0.0, f64::max);
    Ok(Proposal {
        state: advance(sample, g, &w, &vec![ls.t; m]),
        merit: ls.merit,
        t: ls.t,
        step_norm: ls.t * max_w,
        backtracks: ls.backtracks,
    })
}

/// Each unresolved point searches its own step on its own residual. The
/// recorded `t` is the smallest accepted step, which still satisfies the
/// shared decrease test, but the shared-step path bound no longer applies.
fn per_point_proposal<M: DifferentiableMap + ?Sized>(
    map: &M,
    sample: &CompactSample,
    g: &[Vec<f64>],
    w: &[Vec<f64>],
    w_norms: &[f64],
    merit: f64,
    config: &DescentConfig,
) -> Result<Proposal<Vec<Vec<f64>>>> {
    let outcomes: Vec<Result<(f64, f64, usize)>> = (0..sample.len())
        .into_par_iter()
        .map(|j| {
            let (x, y) = (&g[j], &sample.targets[j]);
            let base = residual_norm(map, x, y);
            if sample.is_anchor(j) || base <= config.tol_residual {
                return Ok((0.0, base, 0));
            }
            let ls = line_search(|t| residual_norm(map, &step_point(x, &w[j], t), y), base, config)?;
            Ok((ls.t, ls.merit, ls.backtracks))
        })
        .collect();
    let outcomes: Vec<(f64, f64, usize)> = outcomes.into_iter().collect::<Result<_>>()?;

    let steps: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let t = steps.iter().copied().filter(|&t| t > 0.0).fold(f64::INFINITY, f64::min);
    if !t.is_finite() {
        return Err(Error::Stalled { merit, t_min: config.t_min });
    }
    let new_merit = outcomes.iter().map(|o| o.1).fold(0.0, nan_max);
    let step_norm = steps.iter().zip(w_norms).map(|(t, n)| t * n).fold(0.0, f64::max);
    Ok(Proposal {
        state: advance(sample, g, w, &steps),
        merit: new_merit,
        t,
        step_norm,
        backtracks: outcomes.iter().map(|o| o.2).max().unwrap_or(0),
    })
}

/// One functional descent step from `state`. The returned record has index 0.
pub fn functional_step<M: DifferentiableMap + ?Sized>(
    map: &M,
    state: &RightInverseState,
    config: &DescentConfig,
) -> Result<(RightInverseState, IterationRecord)> {
    config.validate()?;
    let p = functional_proposal(map, &state.sample, &state.g_values, state.merit, config)?;
    let record = IterationRecord {
        index: 0,
        merit_before: state.merit,
        accepted_t: p.t,
        step_norm: p.step_norm,
        merit_after: p.merit,
        backtrack_count: p.backtracks,
    };
    let next = RightInverseState { sample: state.sample.clone(), g_values: p.state, merit: p.merit };
    Ok((next, record))
}

/// Result of [`solve_right_inverse`].
#[derive(Debug, Clone, PartialEq)]
pub struct RightInverseReport {
    pub state: RightInverseState,
    pub trace: DescentTrace,
    pub status: SolveStatus,
    pub failure: Option<Error>,
    /// Sup-norm path length within `M μ(g_init) / c`; `None` without a known `M`.
    pub path_bound_ok: Option<bool>,
}

impl RightInverseReport {
    /// Largest `||g_{j+1} - g_j|| / ||y_{j+1} - y_j||` over consecutive samples.
    pub fn max_adjacent_ratio(&self) -> f64 {
        let (y, g) = (self.state.sample.targets(), self.state.g_values());
        (1..y.len())
            .filter_map(|j| {
                let dy = crate::linalg::distance(&y[j], &y[j - 1]);
                (dy > 0.0).then(|| crate::linalg::distance(&g[j], &g[j - 1]) / dy)
            })
            .fold(0.0, f64::max)
    }
}

/// Functional descent from `g_init` until `μ(g) <= tol_residual`.
pub fn solve_right_inverse<M: DifferentiableMap + ?Sized>(
    map: &M,
    sample: CompactSample,
    g_init: Vec<Vec<f64>>,
    config: &DescentConfig,
) -> Result<RightInverseReport> {
    let start = RightInverseState::new(map, sample, g_init)?;
    let sample = start.sample.clone();
    let outcome = descent_drive(
        |g: &Vec<Vec<f64>>| sup_residual(map, &sample, g),
        |g: &Vec<Vec<f64>>, merit| functional_proposal(map, &sample, g, merit, config),
        start.g_values,
        config,
    )?;
    let trace = outcome.trace;
    let path_bound_ok = map.known_inverse_bound().map(|m| {
        trace.cumulative_path_length
            <= trace.path_length_bound(m, config.decrease_fraction) * (1.0 + 1e-9)
    });
    Ok(RightInverseReport {
        state: RightInverseState { sample, g_values: outcome.state, merit: outcome.merit },
        trace,
        status: outcome.status,
        failure: outcome.failure,
        path_bound_ok,
    })
}
