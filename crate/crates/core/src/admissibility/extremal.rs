use serde::Serialize;

use crate::error::{Error, Result};
use crate::spline::{MonotoneSpline, OrderSpec};

use super::verdict::Verdict;

/// Relative tolerance for matching `x` against the witness at constrained orders.
const MATCH_TOLERANCE: f64 = 1e-7;
/// Relative slack allowed in the extremal inequality.
const SIGN_SLACK: f64 = 1e-8;

/// Comparison of `x` with the extremal witness at one unconstrained order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtremalReport {
    pub order: u32,
    /// Number of constrained orders below `order`.
    pub gap_index: usize,
    pub x_norm: f64,
    /// Norm of the witness at `order`; for orders below `r` and `order == r`, the r-th norm floor.
    pub witness_norm: f64,
    /// `(-1)^gap_index (x_norm - witness_norm)` with the top order at `r`,
    /// `x_norm - witness_norm` otherwise; never negative in exact arithmetic.
    pub signed_difference: f64,
    pub passed: bool,
}

/// Checks the extremal inequality of the witness against `x` at order `k`.
///
/// With the top order equal to `r`, `k` lies strictly between two constrained
/// orders (or below the first) and the sign alternates with the gap index.
/// With every order below `r`, only `k == r` is constrained: `x` needs at
/// least the minimal r-th norm.
pub fn extremal_check(x: &MonotoneSpline, verdict: &Verdict, spec: &OrderSpec, k: u32) -> Result<ExtremalReport> {
    let witness = verdict
        .witness
        .as_ref()
        .ok_or_else(|| Error::invalid("verdict", "an admissible verdict with a witness is required"))?;
    if x.r() != spec.r() || witness.r() != spec.r() {
        return Err(Error::invalid("r", "x, witness and orders must share r"));
    }
    if k > spec.r() || spec.orders().contains(&k) {
        return Err(Error::invalid("k", format!("order {k} must be unconstrained and at most r")));
    }
    let measured = x.measure_norms(spec)?;
    for (&order, &m) in spec.orders().iter().zip(&measured) {
        let w = witness.norm(order);
        if (m - w).abs() > MATCH_TOLERANCE * m.abs().max(w.abs()) {
            return Err(Error::invalid(
                "x",
                format!("norm {m} at order {order} differs from the witness norm {w}"),
            ));
        }
    }

    let gap_index = spec.orders().iter().filter(|&&o| o < k).count();
    let x_norm = x.measure_norms_at(&[k])?[0];
    let witness_norm = if spec.ends_at_r() {
        if k == spec.r() {
            return Err(Error::invalid("k", "order r is constrained"));
        }
        witness.norm(k)
    } else {
        if k != spec.r() {
            return Err(Error::invalid("k", "with every order below r only order r is checked"));
        }
        verdict
            .r_norm_floor
            .ok_or_else(|| Error::invalid("verdict", "missing the r-th norm floor"))?
    };
    // Above every constrained order the r-th norm can only grow.
    let sign = if !spec.ends_at_r() || gap_index % 2 == 0 { 1.0 } else { -1.0 };
    let signed_difference = sign * (x_norm - witness_norm);
    let passed = signed_difference >= -SIGN_SLACK * x_norm.abs().max(witness_norm.abs());
    Ok(ExtremalReport {
        order: k,
        gap_index,
        x_norm,
        witness_norm,
        signed_difference,
        passed,
    })
}

/// Every order at which [`extremal_check`] applies.
pub fn checked_orders(spec: &OrderSpec) -> Vec<u32> {
    if spec.ends_at_r() {
        (0..spec.r()).filter(|k| !spec.orders().contains(k)).collect()
    } else {
        vec![spec.r()]
    }
}

/// Runs [`extremal_check`] at every applicable order.
pub fn extremal_checks(x: &MonotoneSpline, verdict: &Verdict, spec: &OrderSpec) -> Result<Vec<ExtremalReport>> {
    checked_orders(spec)
        .into_iter()
        .map(|k| extremal_check(x, verdict, spec, k))
        .collect()
}
