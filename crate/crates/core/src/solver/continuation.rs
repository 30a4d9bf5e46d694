//! Growing a new smallest knot at fixed magnitude.
//!
//! The new knot `p` starts at 0 and is the path parameter. For each `p` the
//! old knots are the unique ordered solution of the old moment system with `p`
//! frozen, so they are smooth functions of `p`. The norm at the new order is
//! tracked until it first reaches the new target; the crossing is bracketed,
//! bisected and finished by a Newton solve of the enlarged system.
//!
//! Near an asymptote of the path the old knots escape to infinity while `p`
//! barely moves. When the step in `p` collapses the path is reparametrized by
//! the logarithm of the tracked norm and followed on the enlarged system.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::factorial;
use crate::spline::AlternatingSpline;

use super::newton::{newton, SquareSystem};
use super::system::{norm_of, normalizing, KnotState, Layout, Magnitude, MomentSystem};

/// A path whose step falls below this fraction of the largest knot has stalled.
pub const STALL_TOLERANCE: f64 = 1e-15;
const INITIAL_STEP_FRACTION: f64 = 0.01;
const STEP_SHRINK: f64 = 0.5;
const STEP_GROW: f64 = 1.3;
const MAX_STEPS: usize = 20_000;
const BISECTION_WIDTH: f64 = 1e-7;
/// Step in `p`, relative to the largest knot, below which the path switches
/// to the log-norm parameter.
const SWITCH_FRACTION: f64 = 1e-8;
const INITIAL_LOG_STEP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationStep {
    pub grown_knot: f64,
    /// Full knot vector, grown knot last.
    pub knots: Vec<f64>,
    pub tracked_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Termination {
    /// The tracked norm reached the target inside `bracket` (values of the grown knot).
    Crossed { bracket: (f64, f64), bisections: usize },
    /// The path was followed in the log of the tracked norm from grown knot `switched_at`.
    LogNorm { switched_at: f64 },
}

/// Accepted corrector steps; the grown knot is strictly increasing along `steps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuationTrace {
    pub steps: Vec<ContinuationStep>,
    pub termination: Termination,
}

/// Adds one knot to `witness` so its norm at `new_order` equals `new_target`
/// while every norm constrained by `system` is kept.
pub fn grow_knot(
    witness: &AlternatingSpline,
    system: &MomentSystem,
    new_order: u32,
    new_target: f64,
) -> Result<(AlternatingSpline, ContinuationTrace)> {
    check_witness(witness, system, new_order, new_target)?;
    let r = system.r();
    let l = witness.l();
    if witness.knots().is_empty() {
        let q = r - new_order;
        let a = (factorial(q) * new_target / l).powf(1.0 / q as f64);
        let spline = AlternatingSpline::new(r, l, vec![a])?;
        let step = ContinuationStep {
            grown_knot: a,
            knots: vec![a],
            tracked_norm: new_target,
        };
        let trace = ContinuationTrace {
            steps: vec![step],
            termination: Termination::Crossed {
                bracket: (a, a),
                bisections: 0,
            },
        };
        return Ok((spline, trace));
    }

    let transform = normalizing(r, l, witness.knots()[0]);
    let lambda = transform.lambda();
    let scaled = system.scaled(&transform);
    let target = new_target * transform.norm_factor(new_order);
    let start = KnotState::of(&witness.rescale(&transform));
    let mut path = Path {
        system: &scaled,
        r,
        new_order,
        target,
    };
    let (state, trace) = path.run(&start)?;

    let spline = state.spline(r, 1.0)?.rescale(&transform.inverse()).with_magnitude(l)?;
    let unscale = |a: f64| a * lambda;
    let norm_factor = transform.norm_factor(new_order);
    let trace = ContinuationTrace {
        steps: trace
            .steps
            .into_iter()
            .map(|s| ContinuationStep {
                grown_knot: unscale(s.grown_knot),
                knots: s.knots.into_iter().map(unscale).collect(),
                tracked_norm: s.tracked_norm / norm_factor,
            })
            .collect(),
        termination: match trace.termination {
            Termination::Crossed { bracket, bisections } => Termination::Crossed {
                bracket: (unscale(bracket.0), unscale(bracket.1)),
                bisections,
            },
            Termination::LogNorm { switched_at } => Termination::LogNorm {
                switched_at: unscale(switched_at),
            },
        },
    };
    Ok((spline, trace))
}

fn check_witness(witness: &AlternatingSpline, system: &MomentSystem, new_order: u32, new_target: f64) -> Result<()> {
    if witness.r() != system.r() {
        return Err(Error::invalid("witness", "witness order differs from the system's r"));
    }
    if witness.constant() != 0.0 {
        return Err(Error::invalid("witness", "witness must not carry a constant"));
    }
    match system.magnitude() {
        Magnitude::Fixed(l) if (l - witness.l()).abs() <= 1e-12 * l => {}
        _ => return Err(Error::invalid("system", "system must fix l to the witness magnitude")),
    }
    if witness.knot_count() != system.equation_count() {
        return Err(Error::invalid("witness", "witness knot count must equal the number of constrained orders"));
    }
    if !system.is_satisfied_by(witness, 1e-8) {
        return Err(Error::invalid("witness", "witness does not satisfy its moment system"));
    }
    if new_order >= system.r() || system.orders().first().is_some_and(|&k| new_order >= k) {
        return Err(Error::invalid("new_order", "must lie below every constrained order"));
    }
    if !(new_target.is_finite() && new_target > witness.norm(new_order)) {
        return Err(Error::invalid(
            "new_target",
            format!("{new_target} does not exceed the current norm {}", witness.norm(new_order)),
        ));
    }
    Ok(())
}

struct Path<'a> {
    system: &'a MomentSystem,
    r: u32,
    new_order: u32,
    target: f64,
}

/// A point on the path: the grown knot `p` and the gap unknowns of the old
/// knots, the last gap measured down to `p`.
#[derive(Clone)]
struct Point {
    p: f64,
    v: DVector<f64>,
    tracked: f64,
}

impl Path<'_> {
    fn layout(&self, p: f64) -> Layout<'_> {
        Layout::new(self.system, Some(p))
    }

    fn tracked(&self, v: &DVector<f64>, p: f64) -> f64 {
        let state = self.layout(p).state(v);
        norm_of(self.r, self.new_order, &state.knots, &state.gaps, 1.0)
    }

    fn point(&self, p: f64, v: DVector<f64>) -> Point {
        Point {
            p,
            tracked: self.tracked(&v, p),
            v,
        }
    }

    /// Old knots at frozen `p`, starting from `guess`.
    fn correct(&self, p: f64, guess: DVector<f64>) -> Option<DVector<f64>> {
        let layout = self.layout(p);
        if !layout.feasible(&guess) {
            return None;
        }
        newton(&layout, guess).ok().map(|c| c.v)
    }

    /// d(gaps)/dp from the implicit function theorem.
    fn tangent(&self, point: &Point) -> Option<DVector<f64>> {
        let layout = self.layout(point.p);
        let rhs = layout.frozen_derivative(&point.v)?;
        layout.jacobian(&point.v).lu().solve(&(-rhs))
    }

    fn run(&mut self, start: &KnotState) -> Result<(KnotState, ContinuationTrace)> {
        let mut gaps = start.gaps.clone();
        gaps.push(start.smallest());
        let mut current = self.point(0.0, DVector::from_vec(gaps));
        let mut h = INITIAL_STEP_FRACTION * start.smallest();
        let mut steps = Vec::new();
        let mut attempts = 0;
        let bracket = loop {
            attempts += 1;
            if attempts > MAX_STEPS {
                return Err(Error::MaxIterations {
                    iterations: MAX_STEPS,
                    residual: (current.tracked - self.target).abs() / self.target,
                });
            }
            // Gaps are unknowns in their own right, so a narrow gap loses no
            // precision; only a collapsing step signals a merge.
            let largest = current.v.sum() + current.p;
            if h <= STALL_TOLERANCE * largest {
                return Err(Error::PathCollision { at: current.p });
            }
            let p_next = current.p + h;
            let Some(tangent) = self.tangent(&current) else {
                return Err(Error::PathCollision { at: current.p });
            };
            let Some(v) = self.correct(p_next, &current.v + &tangent * h) else {
                h *= STEP_SHRINK;
                if h <= SWITCH_FRACTION * largest {
                    let state = self.follow_log_norm(&current, &mut steps)?;
                    let trace = ContinuationTrace {
                        steps,
                        termination: Termination::LogNorm { switched_at: current.p },
                    };
                    return Ok((state, trace));
                }
                continue;
            };
            let next = self.point(p_next, v);
            steps.push(self.step_of(&next));
            if next.tracked >= self.target {
                break (current, next);
            }
            current = next;
            h *= STEP_GROW;
        };
        let (lo, hi, bisections) = self.bisect(bracket.0, bracket.1);
        let state = self.finish(&lo, &hi)?;
        let trace = ContinuationTrace {
            steps,
            termination: Termination::Crossed {
                bracket: (lo.p, hi.p),
                bisections,
            },
        };
        Ok((state, trace))
    }

    fn bisect(&self, mut lo: Point, mut hi: Point) -> (Point, Point, usize) {
        let mut count = 0;
        while hi.p - lo.p > BISECTION_WIDTH * hi.p && count < 60 {
            let mid_p = 0.5 * (lo.p + hi.p);
            let Some(v) = self.correct(mid_p, (&lo.v + &hi.v) * 0.5) else {
                break;
            };
            let mid = self.point(mid_p, v);
            if mid.tracked >= self.target {
                hi = mid;
            } else {
                lo = mid;
            }
            count += 1;
        }
        (lo, hi, count)
    }

    /// The enlarged system with the new order's target set to `target`.
    fn enlarged(&self, target: f64) -> Result<MomentSystem> {
        let mut orders = vec![self.new_order];
        orders.extend_from_slice(self.system.orders());
        let mut targets = vec![target];
        targets.extend_from_slice(self.system.targets());
        MomentSystem::new(self.r, orders, targets, self.system.magnitude())
    }

    /// Follows the enlarged system from `start` while raising the new order's
    /// target geometrically to the final one. Along this parameter the escaping
    /// knots move smoothly even where `p` is nearly constant.
    fn follow_log_norm(&self, start: &Point, steps: &mut Vec<ContinuationStep>) -> Result<KnotState> {
        let mut v = start.v.clone().push(start.p);
        let mut tau = start.tracked.ln();
        let goal = self.target.ln();
        let mut dtau = INITIAL_LOG_STEP;
        let mut attempts = 0;
        while tau < goal {
            attempts += 1;
            if attempts > MAX_STEPS || dtau <= STALL_TOLERANCE {
                return Err(Error::PathCollision { at: v[v.len() - 1] });
            }
            let system = self.enlarged(tau.exp())?;
            let layout = Layout::new(&system, None);
            let next_tau = (tau + dtau).min(goal);
            let next_system = self.enlarged(next_tau.exp())?;
            let next_layout = Layout::new(&next_system, None);
            // Tangent: J dv/dtau = e_0 for the relative residual of the new order.
            let mut e0 = DVector::zeros(v.len());
            e0[0] = 1.0;
            let Some(tangent) = layout.jacobian(&v).lu().solve(&e0) else {
                return Err(Error::PathCollision { at: v[v.len() - 1] });
            };
            let predicted = &v + &tangent * (next_tau - tau);
            let corrected = next_layout
                .feasible(&predicted)
                .then(|| newton(&next_layout, predicted).ok())
                .flatten();
            match corrected {
                Some(c) => {
                    v = c.v;
                    tau = next_tau;
                    let state = next_layout.state(&v);
                    steps.push(ContinuationStep {
                        grown_knot: state.smallest(),
                        knots: state.knots,
                        tracked_norm: next_tau.exp(),
                    });
                    dtau *= STEP_GROW;
                }
                None => dtau *= STEP_SHRINK,
            }
        }
        let system = self.enlarged(self.target)?;
        Ok(Layout::new(&system, None).state(&v))
    }

    /// Newton on the enlarged system from the interpolated crossing.
    fn finish(&self, lo: &Point, hi: &Point) -> Result<KnotState> {
        let theta = ((self.target - lo.tracked) / (hi.tracked - lo.tracked)).clamp(0.0, 1.0);
        // Unknowns of the enlarged system: every gap, then the grown knot.
        let mut guess: Vec<f64> = lo.v.iter().zip(hi.v.iter()).map(|(&a, &b)| a + theta * (b - a)).collect();
        guess.push(lo.p + theta * (hi.p - lo.p));

        let full = self.enlarged(self.target)?;
        let layout = Layout::new(&full, None);
        let v0 = DVector::from_vec(guess);
        if !layout.feasible(&v0) {
            return Err(Error::PathCollision { at: lo.p });
        }
        let solved = newton(&layout, v0).map_err(|e| match e {
            Error::NoSolution(msg) => Error::numerical(0, format!("crossing refinement failed: {msg}")),
            other => other,
        })?;
        Ok(layout.state(&solved.v))
    }

    fn step_of(&self, point: &Point) -> ContinuationStep {
        ContinuationStep {
            grown_knot: point.p,
            knots: self.layout(point.p).state(&point.v).knots,
            tracked_norm: point.tracked,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_witness() -> (AlternatingSpline, MomentSystem) {
        let witness = AlternatingSpline::new(2, 1.0, vec![1.0]).unwrap();
        let system = MomentSystem::new(2, vec![1], vec![1.0], Magnitude::Fixed(1.0)).unwrap();
        (witness, system)
    }

    #[test]
    fn grows_to_hand_solved_knots() {
        let (witness, system) = unit_witness();
        for (target, a1, a2) in [(0.7, 1.2, 0.2), (10.0, 10.5, 9.5), (0.505, 1.005, 0.005)] {
            let (grown, trace) = grow_knot(&witness, &system, 0, target).unwrap();
            assert_relative_eq!(grown.knots()[0], a1, max_relative = 1e-12);
            assert_relative_eq!(grown.knots()[1], a2, max_relative = 1e-10);
            assert!(!trace.steps.is_empty());
        }
    }

    #[test]
    fn trace_is_monotone_and_on_the_path() {
        let witness = AlternatingSpline::new(5, 1.0, vec![2.0, 1.2]).unwrap();
        let orders = vec![2, 4];
        let targets = witness.norms_at(&orders).unwrap();
        let system = MomentSystem::new(5, orders, targets, Magnitude::Fixed(1.0)).unwrap();
        let target = 3.0 * witness.norm(1);
        let (grown, trace) = grow_knot(&witness, &system, 1, target).unwrap();
        assert_eq!(grown.knot_count(), 3);
        assert_relative_eq!(grown.norm(1), target, max_relative = 1e-12);
        for w in trace.steps.windows(2) {
            assert!(w[1].grown_knot > w[0].grown_knot);
        }
        for step in &trace.steps {
            // The old equations hold with the grown knot present.
            let gaps = crate::numeric::knot_gaps(&step.knots);
            for (&k, &m) in system.orders().iter().zip(system.targets()) {
                let norm = norm_of(5, k, &step.knots, &gaps, 1.0);
                assert!((norm - m).abs() <= 1e-10 * m);
            }
        }
    }

    #[test]
    fn resolves_dipoles_far_from_the_origin() {
        // With the order-1 norm fixed at r = 6 the pair becomes a dipole:
        // a^5 - b^5 = 1 and a^6 - b^6 = 720 m give a ~ 600 m, gap ~ 1 / (5 a^4).
        let witness = AlternatingSpline::new(6, 1.0, vec![1.0]).unwrap();
        let system = MomentSystem::new(6, vec![1], vec![witness.norm(1)], Magnitude::Fixed(1.0)).unwrap();
        for target in [1.6, 10.0] {
            let (grown, _) = grow_knot(&witness, &system, 0, target).unwrap();
            let a = grown.knots()[0];
            assert_relative_eq!(a, 600.0 * target, max_relative = 1e-9);
            assert_relative_eq!(grown.gaps()[0], 1.0 / (5.0 * a.powi(4)), max_relative = 1e-6);
            assert_relative_eq!(grown.norm(0), target, max_relative = 1e-12);
            assert_relative_eq!(grown.norm(1), 1.0 / 120.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_target_not_above_current_norm() {
        let (witness, system) = unit_witness();
        assert!(matches!(grow_knot(&witness, &system, 0, 0.5), Err(Error::InvalidArgument { .. })));
        assert!(matches!(grow_knot(&witness, &system, 1, 2.0), Err(Error::InvalidArgument { .. })));
    }

    #[test]
    fn grows_from_constant() {
        let witness = AlternatingSpline::new(3, 2.0, vec![]).unwrap();
        let system = MomentSystem::new(3, vec![], vec![], Magnitude::Fixed(2.0)).unwrap();
        let (grown, _) = grow_knot(&witness, &system, 2, 4.0).unwrap();
        assert_relative_eq!(grown.knots()[0], 2.0, max_relative = 1e-15);
    }
}
