//! Deciding whether prescribed derivative norms belong to some r-monotone function.

mod decide;
mod extremal;
mod limit;
mod olov;
mod verdict;

pub use decide::{decide, decide_values, rescale_verdict};
pub use extremal::{checked_orders, extremal_check, extremal_checks, ExtremalReport};
pub use limit::{estimate_limit, LimitEstimate, LimitMethod};
pub use olov::olov_bound;
pub use verdict::{Certainty, DecisionConfig, SplineType, Verdict};
