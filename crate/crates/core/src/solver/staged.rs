//! Fitting targets at a fixed magnitude by adding one knot per order, top order first.
//!
//! Stage `m` holds the spline with `m` knots that matches the `m` highest
//! orders. The next order's target is compared with that spline's norm: a
//! smaller target ends the fit, an equal one freezes the spline, a larger one
//! grows the next knot.

use crate::error::{Error, Result};
use crate::numeric::factorial;
use crate::spline::AlternatingSpline;

use super::continuation::grow_knot;
use super::system::{Magnitude, MomentSystem};

#[derive(Debug, Clone, PartialEq)]
pub enum StageOutcome {
    /// Every target strictly exceeded its stage bound; the last stage matches all orders.
    Complete,
    /// The target at `index` met its bound within tolerance and every lower
    /// target matched the frozen spline, except an excess at order 0 that is
    /// carried as `constant`.
    Boundary { index: usize, constant: f64 },
    /// The target at `index` cannot be matched.
    Fails { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct StagedFit {
    /// `stages[m - 1]` has `m` knots.
    pub stages: Vec<AlternatingSpline>,
    /// `targets[i]` minus the bound it was compared with; `None` when never compared.
    pub margins: Vec<Option<f64>>,
    pub outcome: StageOutcome,
    /// Some comparison was decided by the equality tolerance.
    pub touched_boundary: bool,
}

impl StagedFit {
    /// The matching spline, including any constant.
    pub fn witness(&self) -> Option<AlternatingSpline> {
        let last = self.stages.last()?;
        match self.outcome {
            StageOutcome::Complete => Some(last.clone()),
            StageOutcome::Boundary { constant, .. } => last.with_offset(constant).ok(),
            StageOutcome::Fails { .. } => None,
        }
    }

    /// Order index at which the fit was decided.
    pub fn binding_index(&self) -> usize {
        match self.outcome {
            StageOutcome::Complete => 0,
            StageOutcome::Boundary { index, constant } => {
                if constant > 0.0 {
                    0
                } else {
                    index
                }
            }
            StageOutcome::Fails { index } => index,
        }
    }
}

/// Knot of the one-knot spline with magnitude `l` and norm `target` at order `k`.
pub fn single_knot(r: u32, k: u32, target: f64, l: f64) -> f64 {
    let q = r - k;
    (factorial(q) * target / l).powf(1.0 / q as f64)
}

/// Runs the staged fit of ascending `orders` (all below `r`) at magnitude `l`.
///
/// Solver failures surface as numerical failures tagged with the order index.
pub fn staged_fit(r: u32, orders: &[u32], targets: &[f64], l: f64, tolerance: f64) -> Result<StagedFit> {
    let m = orders.len();
    MomentSystem::new(r, orders.to_vec(), targets.to_vec(), Magnitude::Fixed(l))?;
    if m == 0 {
        return Err(Error::invalid("orders", "at least one order below r is required"));
    }
    let mut margins = vec![None; m];
    let top = m - 1;
    let first = AlternatingSpline::new(r, l, vec![single_knot(r, orders[top], targets[top], l)])?;
    margins[top] = Some(0.0);
    let mut stages = vec![first];
    for i in (0..top).rev() {
        let current = stages.last().expect("nonempty stages");
        let bound = current.norm(orders[i]);
        let margin = targets[i] - bound;
        margins[i] = Some(margin);
        if margin.abs() <= tolerance * targets[i] {
            let outcome = match_remaining(current, orders, targets, i, tolerance, &mut margins);
            return Ok(StagedFit {
                stages,
                margins,
                outcome,
                touched_boundary: true,
            });
        }
        if margin < 0.0 {
            return Ok(StagedFit {
                stages,
                margins,
                outcome: StageOutcome::Fails { index: i },
                touched_boundary: false,
            });
        }
        let system = MomentSystem::new(r, orders[i + 1..].to_vec(), targets[i + 1..].to_vec(), Magnitude::Fixed(l))?;
        let (grown, _) = grow_knot(current, &system, orders[i], targets[i]).map_err(|e| match e {
            Error::InvalidArgument { .. } => e,
            other => Error::numerical(i, other.to_string()),
        })?;
        stages.push(grown);
    }
    Ok(StagedFit {
        stages,
        margins,
        outcome: StageOutcome::Complete,
        touched_boundary: false,
    })
}

/// After equality at `index`, every lower order must match the frozen spline.
fn match_remaining(
    spline: &AlternatingSpline,
    orders: &[u32],
    targets: &[f64],
    index: usize,
    tolerance: f64,
    margins: &mut [Option<f64>],
) -> StageOutcome {
    for j in (0..index).rev() {
        let margin = targets[j] - spline.norm(orders[j]);
        margins[j] = Some(margin);
        if margin.abs() <= tolerance * targets[j] {
            continue;
        }
        if margin > 0.0 && orders[j] == 0 {
            return StageOutcome::Boundary { index, constant: margin };
        }
        return StageOutcome::Fails { index: j };
    }
    StageOutcome::Boundary { index, constant: 0.0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_stage_fit_completes() {
        let fit = staged_fit(2, &[0, 1], &[0.7, 1.0], 1.0, 1e-9).unwrap();
        assert_eq!(fit.outcome, StageOutcome::Complete);
        let w = fit.witness().unwrap();
        assert_relative_eq!(w.knots()[0], 1.2, max_relative = 1e-12);
        assert_relative_eq!(w.knots()[1], 0.2, max_relative = 1e-10);
        assert_relative_eq!(fit.margins[0].unwrap(), 0.2, max_relative = 1e-12);
    }

    #[test]
    fn boundary_and_failure() {
        let fit = staged_fit(2, &[0, 1], &[0.5, 1.0], 1.0, 1e-9).unwrap();
        assert_eq!(fit.outcome, StageOutcome::Boundary { index: 0, constant: 0.0 });
        assert_eq!(fit.witness().unwrap().knot_count(), 1);
        let fit = staged_fit(2, &[0, 1], &[0.3, 1.0], 1.0, 1e-9).unwrap();
        assert_eq!(fit.outcome, StageOutcome::Fails { index: 0 });
        assert!(fit.witness().is_none());
    }

    #[test]
    fn excess_at_order_zero_becomes_constant() {
        let fit = staged_fit(3, &[0, 1, 2], &[1.0, 0.5, 1.0], 1.0, 1e-9).unwrap();
        match fit.outcome {
            StageOutcome::Boundary { index: 1, constant } => assert_relative_eq!(constant, 1.0 - 1.0 / 6.0, max_relative = 1e-12),
            ref other => panic!("unexpected {other:?}"),
        }
        assert_eq!(fit.binding_index(), 0);
        // Excess at a positive order is not absorbed.
        let fit = staged_fit(4, &[1, 2, 3], &[1.0, 0.5, 1.0], 1.0, 1e-9).unwrap();
        assert_eq!(fit.outcome, StageOutcome::Fails { index: 0 });
    }
}
