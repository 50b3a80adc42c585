//! Descent on a nonnegative merit function.
//!
//! [`descent_drive`] is the abstract loop: keep asking a proposer for a
//! strictly better state until the merit vanishes, and account for the
//! distance travelled. If every proposal satisfies
//! `μ(next) <= μ(cur) - r·||next - cur||`, the total path length telescopes to
//! at most `μ(x₀) / r`.
//!
//! [`solve_pointwise`] instantiates it with damped Newton steps for
//! `f(x) = y`. The step `t` along `w = [f'(x)]⁻¹(y - f(x))` is accepted when
//! `μ(x + t w) <= (1 - c t) μ(x)` with `c = 1/2` by default. Under
//! `||[f'(x)]⁻¹|| <= M` the direction satisfies `||w|| <= M μ(x)`, so each
//! accepted step buys a decrease of at least `(c/M)·||t w||`, i.e. `r = c/M`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{lu_factor, norm2, step_point, sub};
use crate::maps::DifferentiableMap;

/// Step-control parameters shared by the pointwise and functional solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DescentConfig {
    /// Absolute residual at which a run counts as converged.
    pub tol_residual: f64,
    /// First step tried by the line search.
    pub t_init: f64,
    pub backtrack_factor: f64,
    /// Smallest step tried before reporting a stall.
    pub t_min: f64,
    pub max_iterations: usize,
    /// Coefficient `c` of the acceptance test `μ_new <= (1 - c t) μ`.
    pub decrease_fraction: f64,
    /// Functional solver only: give every sample point its own step.
    pub per_point_steps: bool,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            tol_residual: 1e-10,
            t_init: 1.0,
            backtrack_factor: 0.5,
            t_min: 1e-12,
            max_iterations: 200,
            decrease_fraction: 0.5,
            per_point_steps: false,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("descent config: {what}")));
        if !(self.tol_residual > 0.0) {
            return bad("tol_residual must be positive");
        }
        if !(self.t_init > 0.0 && self.t_init <= 1.0) {
            return bad("t_init must lie in (0, 1]");
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) {
            return bad("backtrack_factor must lie in (0, 1)");
        }
        if !(self.t_min > 0.0 && self.t_min <= self.t_init) {
            return bad("t_min must lie in (0, t_init]");
        }
        if !(self.decrease_fraction > 0.0 && self.decrease_fraction < 1.0) {
            return bad("decrease_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    Stalled,
    MaxIterations,
    SingularJacobian,
}

/// One accepted descent step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub merit_before: f64,
    pub accepted_t: f64,
    /// Size of the increment `||t w||` (sup over sample points for functional steps).
    pub step_norm: f64,
    pub merit_after: f64,
    pub backtrack_count: usize,
}

impl IterationRecord {
    /// `||w||` recovered from the increment; exact when `t` is a power of two.
    pub fn direction_norm(&self) -> f64 {
        self.step_norm / self.accepted_t
    }
}

/// Per-iteration history of a descent run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescentTrace {
    pub records: Vec<IterationRecord>,
    pub initial_merit: f64,
    pub cumulative_path_length: f64,
    pub converged: bool,
}

/// CSV layout of a trace row.
#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    iter: usize,
    t: f64,
    mu_before: f64,
    mu_after: f64,
    step_norm: f64,
    cum_path: f64,
    backtracks: usize,
}

pub const TRACE_CSV_HEADER: &str = "iter,t,mu_before,mu_after,step_norm,cum_path,backtracks";

impl DescentTrace {
    pub fn new(initial_merit: f64) -> Self {
        Self { records: Vec::new(), initial_merit, cumulative_path_length: 0.0, converged: false }
    }

    pub fn push(&mut self, record: IterationRecord) {
        self.cumulative_path_length += record.step_norm;
        self.records.push(record);
    }

    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn final_merit(&self) -> f64 {
        self.records.last().map_or(self.initial_merit, |r| r.merit_after)
    }

    /// `M μ₀ / c`, which is `2 M μ₀` for the default `c = 1/2`.
    pub fn path_length_bound(&self, inverse_bound: f64, decrease_fraction: f64) -> f64 {
        inverse_bound * self.initial_merit / decrease_fraction
    }

    /// Records breaking `μ_after <= (1 - c t) μ_before + 1e-15`.
    pub fn sufficient_decrease_violations(&self, decrease_fraction: f64) -> usize {
        self.records
            .iter()
            .filter(|r| r.merit_after > (1.0 - decrease_fraction * r.accepted_t) * r.merit_before + 1e-15)
            .count()
    }

    /// Records breaking `||w|| <= M μ_before (1 + 1e-9)`.
    pub fn direction_bound_violations(&self, inverse_bound: f64) -> usize {
        self.records
            .iter()
            .filter(|r| r.direction_norm() > inverse_bound * r.merit_before * (1.0 + 1e-9))
            .count()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut cum = 0.0;
        for r in &self.records {
            cum += r.step_norm;
            out.serialize(TraceRow {
                iter: r.index,
                t: r.accepted_t,
                mu_before: r.merit_before,
                mu_after: r.merit_after,
                step_norm: r.step_norm,
                cum_path: cum,
                backtracks: r.backtrack_count,
            })?;
        }
        if self.records.is_empty() {
            out.write_record(TRACE_CSV_HEADER.split(','))?;
        }
        out.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    /// Parses rows written by [`write_csv`](Self::write_csv).
    pub fn read_csv_records<R: Read>(reader: R) -> Result<Vec<IterationRecord>> {
        let mut input = csv::Reader::from_reader(reader);
        let header: Vec<String> = input.headers()?.iter().map(str::to_owned).collect();
        if header.join(",") != TRACE_CSV_HEADER {
            return Err(Error::Csv(format!("unexpected trace header `{}`", header.join(","))));
        }
        input
            .deserialize::<TraceRow>()
            .map(|row| {
                let row = row?;
                Ok(IterationRecord {
                    index: row.iter,
                    merit_before: row.mu_before,
                    accepted_t: row.t,
                    step_norm: row.step_norm,
                    merit_after: row.mu_after,
                    backtrack_count: row.backtracks,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchOutcome {
    pub t: f64,
    pub merit: f64,
    pub backtracks: usize,
}

/// Backtracking along `t ∈ {t_init, t_init β, t_init β², ...}`, `t >= t_min`.
///
/// Returns the first (largest) `t` with `merit_at(t) <= (1 - c t) merit_base`.
/// Running out of steps is [`Error::Stalled`]. A NaN merit counts as a rejection.
pub fn line_search<F>(mut merit_at: F, merit_base: f64, config: &DescentConfig) -> Result<LineSearchOutcome>
where
    F: FnMut(f64) -> f64,
{
    if !(merit_base > 0.0) {
        return Err(Error::InvalidArgument(format!("line search needs a positive base merit, got {merit_base}")));
    }
    let mut t = config.t_init;
    let mut backtracks = 0;
    while t >= config.t_min {
        let merit = merit_at(t);
        if merit <= (1.0 - config.decrease_fraction * t) * merit_base {
            return Ok(LineSearchOutcome { t, merit, backtracks });
        }
        t *= config.backtrack_factor;
        backtracks += 1;
    }
    Err(Error::Stalled { merit: merit_base, t_min: config.t_min })
}

/// `||f(x) - y||`.
pub fn residual_norm<M: DifferentiableMap + ?Sized>(map: &M, x: &[f64], y: &[f64]) -> f64 {
    norm2(&sub(&map.value(x), y))
}

/// Newton direction `w = [f'(x)]⁻¹ (y - f(x))`.
pub fn newton_direction<M: DifferentiableMap + ?Sized>(map: &M, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    map.check_dimension(x)?;
    map.check_dimension(y)?;
    direction_at(map, x, y, 0)
}

/// Direction for sample point `index`; singular Jacobians are reported against it.
pub(crate) fn direction_at<M: DifferentiableMap + ?Sized>(
    map: &M,
    x: &[f64],
    y: &[f64],
    index: usize,
) -> Result<Vec<f64>> {
    let u = sub(y, &map.value(x));
    let lu = lu_factor(&map.derivative(x))
        .map_err(|_| Error::SingularJacobian { index, point: x.to_vec() })?;
    Ok(lu.solve(&u))
}

/// A strictly improving candidate returned by a proposer.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal<S> {
    pub state: S,
    pub merit: f64,
    pub t: f64,
    /// Distance between the candidate and the current state.
    pub step_norm: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveOutcome<S> {
    pub state: S,
    pub merit: f64,
    pub trace: DescentTrace,
    pub status: SolveStatus,
    /// The stall or singularity that ended the run, if any.
    pub failure: Option<Error>,
}

/// Iterates `propose` from `x0` until `merit <= tol_residual`.
///
/// The proposer receives the current state and its merit. It either returns
/// an improving [`Proposal`] or fails with [`Error::Stalled`] /
/// [`Error::SingularJacobian`], which end the run with the matching status.
/// Other errors are returned as-is.
pub fn descent_drive<S, Merit, Propose>(
    merit: Merit,
    mut propose: Propose,
    x0: S,
    config: &DescentConfig,
) -> Result<DriveOutcome<S>>
where
    Merit: Fn(&S) -> f64,
    Propose: FnMut(&S, f64) -> Result<Proposal<S>>,
{
    config.validate()?;
    let mut state = x0;
    let mut current = merit(&state);
    let mut trace = DescentTrace::new(current);

    let (status, failure) = loop {
        if current <= config.tol_residual {
            break (SolveStatus::Converged, None);
        }
        if !current.is_finite() {
            let err = Error::Stalled { merit: current, t_min: config.t_min };
            break (SolveStatus::Stalled, Some(err));
        }
        if trace.iterations() >= config.max_iterations {
            break (SolveStatus::MaxIterations, None);
        }
        match propose(&state, current) {
            Ok(p) => {
                trace.push(IterationRecord {
                    index: trace.iterations(),
                    merit_before: current,
                    accepted_t: p.t,
                    step_norm: p.step_norm,
                    merit_after: p.merit,
                    backtrack_count: p.backtracks,
                });
                state = p.state;
                current = p.merit;
            }
            Err(e @ Error::Stalled { .. }) => break (SolveStatus::Stalled, Some(e)),
            Err(e @ Error::SingularJacobian { .. }) => break (SolveStatus::SingularJacobian, Some(e)),
            Err(e) => return Err(e),
        }
    };
    trace.converged = status == SolveStatus::Converged;
    Ok(DriveOutcome { state, merit: current, trace, status, failure })
}

/// Outcome of a pointwise solve of `f(x) = y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    pub residual_norm: f64,
    pub trace: DescentTrace,
    pub status: SolveStatus,
    /// The map's known `M`, when it has one.
    pub inverse_bound: Option<f64>,
    /// `||w|| <= M μ` at every iteration; `None` without a known `M`.
    pub direction_bound_ok: Option<bool>,
    /// Path length within `M μ₀ / c`; `None` without a known `M`.
    pub path_bound_ok: Option<bool>,
}

/// Damped Newton descent for `f(x) = y` from `x0`.
pub fn solve_pointwise<M: DifferentiableMap + ?Sized>(
    map: &M,
    y: &[f64],
    x0: &[f64],
    config: &DescentConfig,
) -> Result<SolveReport> {
    map.check_dimension(y)?;
    map.check_dimension(x0)?;
    let outcome = descent_drive(
        |x: &Vec<f64>| residual_norm(map, x, y),
        |x: &Vec<f64>, merit| newton_proposal(map, x, y, merit, config),
        x0.to_vec(),
        config,
    )?;
    let inverse_bound = map.known_inverse_bound();
    let trace = outcome.trace;
    let direction_bound_ok = inverse_bound.map(|m| trace.direction_bound_violations(m) == 0);
    let path_bound_ok = inverse_bound.map(|m| {
        trace.cumulative_path_length
            <= trace.path_length_bound(m, config.decrease_fraction) * (1.0 + 1e-9)
    });
    Ok(SolveReport {
        solution: outcome.state,
        residual_norm: outcome.merit,
        trace,
        status: outcome.status,
        inverse_bound,
        direction_bound_ok,
        path_bound_ok,
    })
}

fn newton_proposal<M: DifferentiableMap + ?Sized>(
    map: &M,
    x: &[f64],
    y: &[f64],
    merit: f64,
    config: &DescentConfig,
) -> Result<Proposal<Vec<f64>>> {
    let w = direction_at(map, x, y, 0)?;
    let ls = line_search(|t| residual_norm(map, &step_point(x, &w, t), y), merit, config)?;
    Ok(Proposal {
        state: step_point(x, &w, ls.t),
        merit: ls.merit,
        t: ls.t,
        step_norm: ls.t * norm2(&w),
        backtracks: ls.backtracks,
    })
}
