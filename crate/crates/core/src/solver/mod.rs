//! Moment systems that pin spline knots to target norms, and their solvers.

mod continuation;
mod family;
mod newton;
mod staged;
mod system;
mod vandermonde;

pub use continuation::{grow_knot, ContinuationStep, ContinuationTrace, Termination, STALL_TOLERANCE};
pub use family::{solve_for_l, solve_min_l, MinimalMagnitude, FAMILY_TOLERANCE};
pub use newton::{solve_fixed_count, solve_fixed_count_from, RESIDUAL_TOLERANCE};
pub use staged::{single_knot, staged_fit, StageOutcome, StagedFit};
pub use system::{Magnitude, MomentSystem};
pub use vandermonde::{vandermonde_det, vandermonde_log_det};

pub(crate) use family::{min_l_normalized, tail_bound, top_normalization};
pub(crate) use newton::{newton, SquareSystem};
pub(crate) use system::normalizing;
