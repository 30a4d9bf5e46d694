//! Fixed-magnitude family members and the minimal magnitude for orders below `r`.
//!
//! For targets at orders all below `r`, a matching spline with magnitude `l`
//! and one knot per order exists for every `l` above a minimal value. The
//! member at `l` is the staged fit of the targets with `l` playing the role of
//! the r-th norm. `bound(l)`, the norm of the tail member at the first order,
//! decreases in `l`; the minimal magnitude is where it meets the first target.

use crate::error::{Error, Result};
use crate::numeric::factorial;
use crate::spline::{check_order, check_positive, validate_orders, AlternatingSpline, ScaleTransform};

use super::newton::solve_from_state;
use super::staged::{staged_fit, StageOutcome};
use super::system::{normalizing, KnotState, Magnitude, MomentSystem};

/// Relative tolerance for deciding that a family member sits at the minimal magnitude.
pub const FAMILY_TOLERANCE: f64 = 1e-9;
const ROOT_TOLERANCE: f64 = 1e-11;
const MAX_EXPANSIONS: usize = 14;

/// Minimizer of `l` over splines matching targets at orders below `r`.
#[derive(Debug, Clone, PartialEq)]
pub enum MinimalMagnitude {
    /// Attained by a spline with one knot fewer than the number of targets.
    Interior { l: f64, spline: AlternatingSpline },
    /// The first target equals the norm of the tail's minimizer, which is the answer.
    Boundary { l: f64, spline: AlternatingSpline },
    /// The tail's minimizer plus a positive constant absorbing an excess at order 0.
    WithConstant { l: f64, spline: AlternatingSpline },
    /// The infimum `l_inf` is approached but not attained: the first target
    /// exceeds every norm reachable at the tail's minimal magnitude.
    Unattained { l_inf: f64 },
}

impl MinimalMagnitude {
    /// The minimal (or infimal) magnitude.
    pub fn l(&self) -> f64 {
        match self {
            Self::Interior { l, .. } | Self::Boundary { l, .. } | Self::WithConstant { l, .. } => *l,
            Self::Unattained { l_inf } => *l_inf,
        }
    }

    pub fn spline(&self) -> Option<&AlternatingSpline> {
        match self {
            Self::Interior { spline, .. } | Self::Boundary { spline, .. } | Self::WithConstant { spline, .. } => {
                Some(spline)
            }
            Self::Unattained { .. } => None,
        }
    }

    pub fn is_attained(&self) -> bool {
        !matches!(self, Self::Unattained { .. })
    }

    fn rescaled(self, r: u32, t: &ScaleTransform) -> Self {
        match self {
            Self::Interior { spline, .. } => {
                let spline = spline.rescale(t);
                Self::Interior { l: spline.l(), spline }
            }
            Self::Boundary { spline, .. } => {
                let spline = spline.rescale(t);
                Self::Boundary { l: spline.l(), spline }
            }
            Self::WithConstant { spline, .. } => {
                let spline = spline.rescale(t);
                Self::WithConstant { l: spline.l(), spline }
            }
            Self::Unattained { l_inf } => Self::Unattained {
                l_inf: l_inf * t.norm_factor(r),
            },
        }
    }
}

fn validate(r: u32, orders: &[u32], targets: &[f64]) -> Result<()> {
    check_order(r)?;
    validate_orders(r, orders)?;
    if orders.is_empty() {
        return Err(Error::invalid("orders", "at least one order is required"));
    }
    if orders.last().is_some_and(|&k| k >= r) {
        return Err(Error::invalid("orders", "orders must lie below r"));
    }
    if orders.len() != targets.len() {
        return Err(Error::invalid(
            "targets",
            format!("{} orders but {} targets", orders.len(), targets.len()),
        ));
    }
    check_positive("targets", targets)
}

/// Transform after which the one-knot spline matching the top two orders has
/// unit magnitude and unit knot (or, for a single order, unit target and magnitude).
pub(crate) fn top_normalization(r: u32, orders: &[u32], targets: &[f64]) -> ScaleTransform {
    let m = orders.len();
    if m == 1 {
        let q = r - orders[0];
        let a = (factorial(q) * targets[0]).powf(1.0 / q as f64);
        return normalizing(r, 1.0, a);
    }
    let (a, l) = two_order_minimum(r, orders[m - 2], targets[m - 2], orders[m - 1], targets[m - 1]);
    normalizing(r, l, a)
}

/// Knot and magnitude of the one-knot spline with norms `ma` at `ka` and `mb` at `kb > ka`.
fn two_order_minimum(r: u32, ka: u32, ma: f64, kb: u32, mb: f64) -> (f64, f64) {
    let (qa, qb) = (r - ka, r - kb);
    let ln_a = ((ma * factorial(qa)).ln() - (mb * factorial(qb)).ln()) / (qa - qb) as f64;
    let a = ln_a.exp();
    let l = (mb.ln() + factorial(qb).ln() - qb as f64 * ln_a).exp();
    (a, l)
}

/// Spline with magnitude `l` matching every target, one knot per order
/// (one fewer at the minimal magnitude).
pub fn solve_for_l(r: u32, orders: &[u32], targets: &[f64], l: f64) -> Result<AlternatingSpline> {
    validate(r, orders, targets)?;
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::invalid("l", format!("{l} is not a positive finite number")));
    }
    let t = top_normalization(r, orders, targets);
    let scaled_targets = scale_targets(&t, orders, targets);
    let member = member_normalized(r, orders, &scaled_targets, l * t.norm_factor(r))?;
    member.rescale(&t.inverse()).with_magnitude(l)
}

fn scale_targets(t: &ScaleTransform, orders: &[u32], targets: &[f64]) -> Vec<f64> {
    orders.iter().zip(targets).map(|(&k, &m)| m * t.norm_factor(k)).collect()
}

fn member_normalized(r: u32, orders: &[u32], targets: &[f64], l: f64) -> Result<AlternatingSpline> {
    let fit = staged_fit(r, orders, targets, l, FAMILY_TOLERANCE)?;
    match fit.outcome {
        StageOutcome::Complete | StageOutcome::Boundary { constant: 0.0, .. } => {
            Ok(fit.stages.last().cloned().expect("nonempty stages"))
        }
        _ => Err(Error::NoSolution(format!("magnitude {l} is below the minimal magnitude"))),
    }
}

/// Minimal magnitude over splines matching all targets (at least two orders, all below `r`).
pub fn solve_min_l(r: u32, orders: &[u32], targets: &[f64]) -> Result<MinimalMagnitude> {
    validate(r, orders, targets)?;
    if orders.len() < 2 {
        return Err(Error::invalid(
            "orders",
            "a single constraint has no minimal magnitude (the infimum 0 is not attained)",
        ));
    }
    let t = top_normalization(r, orders, targets);
    let scaled = scale_targets(&t, orders, targets);
    let result = min_l_normalized(r, orders, &scaled)?;
    Ok(result.rescaled(r, &t.inverse()))
}

/// `bound(l)`: norm at `k1` of the tail member with magnitude `l`; `None` below the tail's minimum.
pub(crate) fn tail_bound(r: u32, k1: u32, tail_orders: &[u32], tail_targets: &[f64], l: f64) -> Result<Option<(f64, AlternatingSpline)>> {
    match member_normalized(r, tail_orders, tail_targets, l) {
        Ok(member) => Ok(Some((member.norm(k1), member))),
        Err(Error::NoSolution(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

pub(crate) fn min_l_normalized(r: u32, orders: &[u32], targets: &[f64]) -> Result<MinimalMagnitude> {
    let m = orders.len();
    if m == 2 {
        let (a, l) = two_order_minimum(r, orders[0], targets[0], orders[1], targets[1]);
        return Ok(MinimalMagnitude::Interior {
            l,
            spline: AlternatingSpline::new(r, l, vec![a])?,
        });
    }
    let (k1, m1) = (orders[0], targets[0]);
    let tail_orders = &orders[1..];
    let tail_targets = &targets[1..];
    let tail = min_l_normalized(r, tail_orders, tail_targets)?;
    let l_lo = match &tail {
        MinimalMagnitude::Interior { l, spline } | MinimalMagnitude::Boundary { l, spline } => {
            let n = spline.norm(k1);
            let margin = m1 - n;
            if margin.abs() <= FAMILY_TOLERANCE * m1 {
                return Ok(MinimalMagnitude::Boundary {
                    l: *l,
                    spline: spline.clone(),
                });
            }
            if margin > 0.0 {
                return Ok(if k1 == 0 {
                    MinimalMagnitude::WithConstant {
                        l: *l,
                        spline: spline.with_offset(margin)?,
                    }
                } else {
                    MinimalMagnitude::Unattained { l_inf: *l }
                });
            }
            *l
        }
        MinimalMagnitude::WithConstant { .. } => {
            return Err(Error::numerical(1, "tail minimizer carries a constant at a positive order"));
        }
        MinimalMagnitude::Unattained { l_inf } => {
            // Probe toward l_inf for a magnitude whose bound still exceeds m1.
            let mut delta = 1.0;
            let mut found = None;
            for _ in 0..40 {
                let l = l_inf * (1.0 + delta);
                if let Some((b, _)) = tail_bound(r, k1, tail_orders, tail_targets, l)? {
                    if b > m1 {
                        found = Some(l);
                        break;
                    }
                }
                delta *= 0.25;
            }
            match found {
                Some(l) => l,
                None => return Ok(MinimalMagnitude::Unattained { l_inf: *l_inf }),
            }
        }
    };
    let l_star = find_crossing(r, k1, m1, tail_orders, tail_targets, l_lo)?;
    polish_minimum(r, orders, targets, tail_orders, tail_targets, l_star)
}

/// Magnitude where `bound(l) = m1`, given `bound(l_lo) > m1` (or `l_lo` at the tail minimum).
fn find_crossing(r: u32, k1: u32, m1: f64, tail_orders: &[u32], tail_targets: &[f64], l_lo: f64) -> Result<f64> {
    let eval = |l: f64| -> Result<Option<f64>> { Ok(tail_bound(r, k1, tail_orders, tail_targets, l)?.map(|(b, _)| b)) };
    // g(x) = ln bound(e^x) - ln m1, decreasing.
    let mut lo = l_lo.ln();
    let mut g_lo = match eval(l_lo)? {
        Some(b) => b.ln() - m1.ln(),
        None => f64::INFINITY,
    };
    let mut hi = lo + 2f64.ln();
    let mut g_hi;
    let mut expansions = 0;
    loop {
        match eval(hi.exp())? {
            Some(b) if b < m1 => {
                g_hi = b.ln() - m1.ln();
                break;
            }
            Some(b) => {
                lo = hi;
                g_lo = b.ln() - m1.ln();
            }
            None => lo = hi,
        }
        hi += 4f64.ln();
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::NoSolution("the first target does not exceed the large-magnitude limit".into()));
        }
    }
    // Illinois regula falsi, bisecting while the lower end has no finite value.
    let mut side = 0i8;
    for _ in 0..200 {
        if hi - lo <= ROOT_TOLERANCE {
            break;
        }
        let x = if g_lo.is_finite() {
            (lo * g_hi - hi * g_lo) / (g_hi - g_lo)
        } else {
            0.5 * (lo + hi)
        };
        let x = if x > lo && x < hi { x } else { 0.5 * (lo + hi) };
        let g = match eval(x.exp())? {
            Some(b) => b.ln() - m1.ln(),
            None => f64::INFINITY,
        };
        if g == 0.0 {
            return Ok(x.exp());
        }
        if g > 0.0 {
            lo = x;
            g_lo = g;
            if side == 1 {
                g_hi *= 0.5;
            }
            side = 1;
        } else {
            hi = x;
            g_hi = g;
            if side == -1 && g_lo.is_finite() {
                g_lo *= 0.5;
            }
            side = -1;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Square Newton solve in (knots, l) from the family member near `l_star`.
fn polish_minimum(
    r: u32,
    orders: &[u32],
    targets: &[f64],
    tail_orders: &[u32],
    tail_targets: &[f64],
    l_star: f64,
) -> Result<MinimalMagnitude> {
    let m = orders.len();
    let member = member_normalized(r, tail_orders, tail_targets, l_star)
        .map_err(|e| Error::numerical(0, format!("minimal magnitude seed: {e}")))?;
    let mut seed = KnotState::of(&member);
    while seed.knots.len() < m - 1 {
        let smallest = seed.knots.last().copied().unwrap_or(1.0);
        seed.push(1e-3 * smallest);
    }
    let system = MomentSystem::new(r, orders.to_vec(), targets.to_vec(), Magnitude::Free)?;
    match solve_from_state(&system, &seed, Some(l_star)) {
        Ok(spline) => Ok(MinimalMagnitude::Interior { l: spline.l(), spline }),
        Err(e) => Err(Error::numerical(0, format!("minimal magnitude refinement: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn min_l_just_above_an_unattained_tail() {
        // The tail (1, 2, 3) has an unattained minimum near 0.5786, so growing the
        // order-0 knot runs into a near-asymptote where the old knots escape.
        let norms = [1.6039278107900192, 0.9903636300879777, 1.3666808604992573, 1.2575455427365545];
        let res = solve_min_l(4, &[0, 1, 2, 3], &norms).unwrap();
        let spline = res.spline().unwrap();
        for (k, &m) in norms[..3].iter().enumerate() {
            assert_relative_eq!(spline.norm(k as u32), m, max_relative = 1e-9);
        }
        assert!(res.l() > 0.5785 && res.l() < 0.5786);
    }

    #[test]
    fn min_l_two_orders() {
        let res = solve_min_l(3, &[1, 2], &[1.0, 1.0]).unwrap();
        assert_relative_eq!(res.l(), 0.5, max_relative = 1e-14);
        assert_relative_eq!(res.spline().unwrap().knots()[0], 2.0, max_relative = 1e-14);
        let res = solve_min_l(3, &[1, 2], &[2.0, 2.0]).unwrap();
        assert_relative_eq!(res.l(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(res.spline().unwrap().knots()[0], 2.0, max_relative = 1e-14);
    }

    #[test]
    fn min_l_rejects_single_order() {
        assert!(matches!(solve_min_l(2, &[1], &[1.0]), Err(Error::InvalidArgument { .. })));
    }

    #[test]
    fn family_members_at_fixed_l() {
        let s = solve_for_l(3, &[1, 2], &[1.0, 1.0], 0.5).unwrap();
        assert_eq!(s.knot_count(), 1);
        assert_relative_eq!(s.knots()[0], 2.0, max_relative = 1e-9);
        let s = solve_for_l(3, &[1, 2], &[1.0, 1.0], 1.0).unwrap();
        assert_relative_eq!(s.knots()[0], 1.5, max_relative = 1e-12);
        assert_relative_eq!(s.knots()[1], 0.5, max_relative = 1e-12);
        let s = solve_for_l(3, &[1, 2], &[1.0, 1.0], 2.0).unwrap();
        assert_relative_eq!(s.knots()[0], 1.25, max_relative = 1e-12);
        assert_relative_eq!(s.knots()[1], 0.75, max_relative = 1e-12);
        assert!(matches!(solve_for_l(3, &[1, 2], &[1.0, 1.0], 0.4), Err(Error::NoSolution(_))));
    }

    #[test]
    fn min_l_three_orders_matches_family_endpoint() {
        let (r, orders, targets) = (5, [1u32, 2, 3], [0.7, 1.0, 1.0]);
        let res = solve_min_l(r, &orders, &targets).unwrap();
        let MinimalMagnitude::Interior { l, spline } = &res else {
            panic!("expected interior minimum, got {res:?}");
        };
        assert_eq!(spline.knot_count(), 2);
        for (&k, &m) in orders.iter().zip(&targets) {
            assert_relative_eq!(spline.norm(k), m, max_relative = 1e-11);
        }
        let member = solve_for_l(r, &orders, &targets, *l).unwrap();
        assert_eq!(member.knot_count(), 2);
        let above = solve_for_l(r, &orders, &targets, l * 1.01).unwrap();
        assert_eq!(above.knot_count(), 3);
    }

    #[test]
    fn min_l_unattained_when_first_target_too_large() {
        // Tail (2, 3) at r = 4 has minimizer l = 1/2 with knot 2; its order-1 norm is 2/3.
        let res = solve_min_l(4, &[1, 2, 3], &[1.0, 1.0, 1.0]).unwrap();
        match res {
            MinimalMagnitude::Unattained { l_inf } => assert_relative_eq!(l_inf, 0.5, max_relative = 1e-12),
            other => panic!("expected unattained, got {other:?}"),
        }
    }
}
