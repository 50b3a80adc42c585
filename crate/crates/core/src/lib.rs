//! Numerical inversion of C¹ maps `ℝⁿ → ℝⁿ` whose Jacobian inverses are
//! uniformly bounded, `||[f'(x)]⁻¹|| <= M` everywhere.
//!
//! * [`maps`]: registry of test maps, Jacobian checks, estimates of `M` and
//!   of the linearization modulus α(t).
//! * [`linalg`]: dense LU and inverse spectral norms.
//! * [`descent`]: the generic descent driver, the sufficient-decrease line
//!   search and the damped-Newton pointwise solver.
//! * [`right_inverse`]: descent for a whole right inverse on a sampled
//!   compact set under the sup-residual merit.
//! * [`lift`]: path lifting along segments and collision certificates.
//!
//! ```
//! use hadamard_core::{solve_pointwise, DescentConfig, MapInstance, SolveStatus};
//!
//! let f = MapInstance::cubic(1).unwrap();
//! let report = solve_pointwise(&f, &[10.0], &[0.0], &DescentConfig::default()).unwrap();
//! assert_eq!(report.status, SolveStatus::Converged);
//! assert!((report.solution[0] - 2.0).abs() < 1e-9);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod descent;
pub mod error;
pub mod lift;
pub mod linalg;
pub mod maps;
pub mod right_inverse;

pub use descent::{
    descent_drive, line_search, newton_direction, residual_norm, solve_pointwise, DescentConfig,
    DescentTrace, DriveOutcome, IterationRecord, LineSearchOutcome, Proposal, SolveReport,
    SolveStatus, TRACE_CSV_HEADER,
};
pub use error::{Error, Result};
pub use lift::{
    certify_pair, lift_analysis, sample_segment_image, LiftReport, NormalizedMap, Verdict,
    DEFAULT_SEGMENT_SAMPLES, DEFAULT_TOL_LIFT, LIFT_CSV_HEADER,
};
pub use linalg::{inverse_spectral_norm, lu_factor, solve_linear, DenseMatrix, LuFactors};
pub use maps::{
    check_jacobian, estimate_inverse_bound, jacobian_fd, linearization_modulus,
    DifferentiableMap, LinearizationEstimate, MapInstance, MapSpec, ParamValue,
};
pub use right_inverse::{
    functional_step, solve_right_inverse, Anchor, CompactSample, RightInverseReport,
    RightInverseState, SampleFile,
};
