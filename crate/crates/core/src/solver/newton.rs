use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::spline::{check_knots, AlternatingSpline};

use super::system::{norm_of, normalizing, KnotState, Layout, Magnitude, MomentSystem};

/// Relative residual accepted as converged.
pub const RESIDUAL_TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 60;
/// Consecutive steps cut short by the domain boundary before giving up.
const BOUNDARY_PATIENCE: usize = 25;
const POLISH_STEPS: usize = 3;
const HOMOTOPY_FIRST_STEP: f64 = 0.25;
const HOMOTOPY_MIN_STEP: f64 = 1e-6;

/// A square nonlinear system on an open feasible domain.
pub(crate) trait SquareSystem {
    /// Residuals, each relative to its own target.
    fn residual(&self, v: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, v: &DVector<f64>) -> DMatrix<f64>;
    fn feasible(&self, v: &DVector<f64>) -> bool;
    /// Residual level explained by rounding `v` to double precision.
    fn noise_floor(&self, v: &DVector<f64>, jac: &DMatrix<f64>) -> f64;
}

#[derive(Debug)]
pub(crate) struct Converged {
    pub v: DVector<f64>,
}

/// Damped Newton from `v0`: halve the step until the iterate stays feasible
/// and the residual decreases.
pub(crate) fn newton<S: SquareSystem>(layout: &S, v0: DVector<f64>) -> Result<Converged> {
    if !layout.feasible(&v0) {
        return Err(Error::invalid("initial_knots", "initial guess is not strictly ordered and positive"));
    }
    let mut v = v0;
    let mut f = layout.residual(&v);
    let mut boundary_run = 0;
    for _ in 0..MAX_ITERATIONS {
        let norm_f = f.amax();
        let jac = layout.jacobian(&v);
        let floor = layout.noise_floor(&v, &jac);
        if norm_f <= RESIDUAL_TOLERANCE.max(4.0 * floor) {
            return Ok(Converged { v: polish(layout, v, f, jac) });
        }
        let Some(delta) = jac.clone().lu().solve(&(-&f)) else {
            return Err(Error::NoSolution("singular Jacobian (knots merged)".into()));
        };
        let mut step = 1.0;
        let mut hit_boundary = false;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = &v + &delta * step;
            if layout.feasible(&candidate) {
                let fc = layout.residual(&candidate);
                if fc.amax() <= (1.0 - 1e-4 * step) * norm_f {
                    accepted = Some((candidate, fc));
                    break;
                }
            } else {
                hit_boundary = true;
            }
            step *= 0.5;
        }
        let Some((candidate, fc)) = accepted else {
            // No descent left: either rounding noise or a genuine dead end.
            if norm_f <= RESIDUAL_TOLERANCE.max(64.0 * floor) {
                return Ok(Converged { v });
            }
            return Err(Error::NoSolution(if hit_boundary {
                "iteration leaves the ordered positive domain".into()
            } else {
                format!("residual stalled at {norm_f:e}")
            }));
        };
        boundary_run = if hit_boundary { boundary_run + 1 } else { 0 };
        if boundary_run >= BOUNDARY_PATIENCE {
            return Err(Error::NoSolution("iterates pinned against the domain boundary".into()));
        }
        v = candidate;
        f = fc;
    }
    Err(Error::MaxIterations {
        iterations: MAX_ITERATIONS,
        residual: f.amax(),
    })
}

/// Solves a square moment system from `initial_knots`.
///
/// With a free magnitude the initial `l` is the least-squares fit of the
/// targets at the given knots. The solution is the unique ordered one, so runs
/// from different guesses agree.
pub fn solve_fixed_count(system: &MomentSystem, initial_knots: &[f64]) -> Result<AlternatingSpline> {
    solve_fixed_count_from(system, initial_knots, None)
}

/// As [`solve_fixed_count`], with an explicit starting magnitude when `l` is free.
pub fn solve_fixed_count_from(
    system: &MomentSystem,
    initial_knots: &[f64],
    initial_l: Option<f64>,
) -> Result<AlternatingSpline> {
    check_knots("initial_knots", initial_knots)?;
    let initial = KnotState::from_knots(initial_knots);
    match solve_from_state(system, &initial, initial_l) {
        Err(first @ (Error::NoSolution(_) | Error::MaxIterations { .. })) => {
            let (start, l) = fit_scale(system, &initial, initial_l);
            solve_from_state(system, &start, Some(l))
                .or_else(|_| target_homotopy(system, &start, l))
                .map_err(|_| first)
        }
        other => other,
    }
}

/// Deforms the targets geometrically from the norms of the initial guess,
/// which it solves exactly, to the requested ones. Used when Newton from a
/// distant guess leaves its basin.
fn target_homotopy(system: &MomentSystem, initial: &KnotState, l0: f64) -> Result<AlternatingSpline> {
    let r = system.r();
    let start: Vec<f64> = system
        .orders()
        .iter()
        .map(|&k| norm_of(r, k, &initial.knots, &initial.gaps, l0))
        .collect();
    let mut current = initial.spline(r, l0)?;
    let mut s = 0.0;
    let mut h = HOMOTOPY_FIRST_STEP;
    while s < 1.0 {
        if h < HOMOTOPY_MIN_STEP {
            return Err(Error::NoSolution(format!("target homotopy stalled at {s}")));
        }
        let next = (s + h).min(1.0);
        let targets = start
            .iter()
            .zip(system.targets())
            .map(|(a, b)| a.powf(1.0 - next) * b.powf(next))
            .collect();
        let stage = MomentSystem::new(r, system.orders().to_vec(), targets, system.magnitude())?;
        match solve_from_state(&stage, &KnotState::of(&current), Some(current.l())) {
            Ok(spline) => {
                current = spline;
                s = next;
                h *= 2.0;
            }
            Err(Error::NoSolution(_) | Error::MaxIterations { .. }) => h *= 0.5,
            Err(e) => return Err(e),
        }
    }
    Ok(current)
}

/// As [`solve_fixed_count_from`], seeded with knots and their exact gaps.
pub(crate) fn solve_from_state(
    system: &MomentSystem,
    initial: &KnotState,
    initial_l: Option<f64>,
) -> Result<AlternatingSpline> {
    if initial.knots.len() != system.square_knot_count() {
        return Err(Error::invalid(
            "initial_knots",
            format!(
                "{} knots given, square system needs {}",
                initial.knots.len(),
                system.square_knot_count()
            ),
        ));
    }
    if system.equation_count() == 0 {
        let l = match system.magnitude() {
            Magnitude::Fixed(l) => l,
            Magnitude::Free => return Err(Error::invalid("targets", "no equations to fix l")),
        };
        return AlternatingSpline::new(system.r(), l, Vec::new());
    }
    let r = system.r();
    let l0 = match (system.magnitude(), initial_l) {
        (Magnitude::Fixed(l), _) => l,
        (Magnitude::Free, Some(l)) if l.is_finite() && l > 0.0 => l,
        (Magnitude::Free, Some(l)) => {
            return Err(Error::invalid("initial_l", format!("{l} is not a positive finite number")))
        }
        (Magnitude::Free, None) => fit_magnitude(system, initial),
    };

    let transform = normalizing(r, l0, initial.knots[0]);
    let scaled = system.scaled(&transform);
    let layout = Layout::new(&scaled, None);
    let v0 = layout.pack(&initial.scaled(1.0 / transform.lambda()), 1.0);
    let solved = newton(&layout, v0)?;
    let spline = layout.state(&solved.v).spline(r, layout.l(&solved.v))?.rescale(&transform.inverse());
    match system.magnitude() {
        Magnitude::Fixed(l) => spline.with_magnitude(l),
        Magnitude::Free => Ok(spline),
    }
}

/// Magnitude that best matches the targets (geometric mean of ratios) at fixed knots.
fn fit_magnitude(system: &MomentSystem, initial: &KnotState) -> f64 {
    let sum: f64 = system
        .orders()
        .iter()
        .zip(system.targets())
        .map(|(&k, &m)| (m / norm_of(system.r(), k, &initial.knots, &initial.gaps, 1.0)).ln())
        .sum();
    (sum / system.equation_count() as f64).exp()
}

/// The guess stretched by `lambda` and its magnitude by `mu`, with both fitted
/// to the targets in log space: the order-k norm scales as `mu * lambda^(r-k)`.
fn fit_scale(system: &MomentSystem, initial: &KnotState, initial_l: Option<f64>) -> (KnotState, f64) {
    let r = system.r();
    let l0 = match (system.magnitude(), initial_l) {
        (Magnitude::Fixed(l), _) | (Magnitude::Free, Some(l)) => l,
        (Magnitude::Free, None) => fit_magnitude(system, initial),
    };
    let points: Vec<(f64, f64)> = system
        .orders()
        .iter()
        .zip(system.targets())
        .map(|(&k, &m)| ((r - k) as f64, (m / norm_of(r, k, &initial.knots, &initial.gaps, l0)).ln()))
        .collect();
    let n = points.len() as f64;
    let (log_lambda, log_mu) = match system.magnitude() {
        Magnitude::Fixed(_) => {
            let sxy: f64 = points.iter().map(|(x, y)| x * y).sum();
            let sxx: f64 = points.iter().map(|(x, _)| x * x).sum();
            (sxy / sxx, 0.0)
        }
        Magnitude::Free if points.len() < 2 => (0.0, 0.0),
        Magnitude::Free => {
            let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
            let my = points.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
            let slope = sxy / sxx;
            (slope, my - slope * mx)
        }
    };
    (initial.scaled(log_lambda.exp()), l0 * log_mu.exp())
}

/// Full Newton steps past convergence, kept while the residual still drops.
/// Ill-conditioned systems gain knot digits well below the accepted residual.
fn polish<S: SquareSystem>(layout: &S, mut v: DVector<f64>, mut f: DVector<f64>, mut jac: DMatrix<f64>) -> DVector<f64> {
    for _ in 0..POLISH_STEPS {
        let Some(delta) = jac.lu().solve(&(-&f)) else { break };
        let candidate = &v + delta;
        if !layout.feasible(&candidate) {
            break;
        }
        let fc = layout.residual(&candidate);
        if fc.amax() >= f.amax() {
            break;
        }
        jac = layout.jacobian(&candidate);
        v = candidate;
        f = fc;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn recovers_two_knot_example() {
        let sys = MomentSystem::new(3, vec![1, 2], vec![1.5, 1.0], Magnitude::Fixed(1.0)).unwrap();
        let s = solve_fixed_count(&sys, &[2.5, 0.5]).unwrap();
        assert_relative_eq!(s.knots()[0], 2.0, max_relative = 1e-12);
        assert_relative_eq!(s.knots()[1], 1.0, max_relative = 1e-12);
        assert_eq!(s.l(), 1.0);
    }

    #[test]
    fn one_knot_closed_form() {
        let sys = MomentSystem::new(2, vec![1], vec![1.0], Magnitude::Fixed(1.0)).unwrap();
        let s = solve_fixed_count(&sys, &[3.0]).unwrap();
        assert_relative_eq!(s.knots()[0], 1.0, max_relative = 1e-13);
    }

    #[test]
    fn infeasible_targets_report_no_solution() {
        let sys = MomentSystem::new(2, vec![0, 1], vec![0.3, 1.0], Magnitude::Fixed(1.0)).unwrap();
        let err = solve_fixed_count(&sys, &[1.5, 0.5]).unwrap_err();
        assert!(matches!(err, Error::NoSolution(_)), "{err:?}");
    }

    #[test]
    fn free_magnitude_minimal_spline() {
        let sys = MomentSystem::new(3, vec![1, 2], vec![1.0, 1.0], Magnitude::Free).unwrap();
        let s = solve_fixed_count(&sys, &[1.0]).unwrap();
        assert_relative_eq!(s.l(), 0.5, max_relative = 1e-12);
        assert_relative_eq!(s.knots()[0], 2.0, max_relative = 1e-12);
    }

    #[test]
    fn rejects_wrong_knot_count_and_bad_guess() {
        let sys = MomentSystem::new(3, vec![1, 2], vec![1.5, 1.0], Magnitude::Fixed(1.0)).unwrap();
        assert!(matches!(solve_fixed_count(&sys, &[1.0]), Err(Error::InvalidArgument { .. })));
        assert!(matches!(solve_fixed_count(&sys, &[1.0, 2.0]), Err(Error::InvalidArgument { .. })));
    }

    #[test]
    fn distant_guesses_reach_the_same_knots() {
        let spline = AlternatingSpline::new(6, 1.0, vec![2.0, 1.2, 0.5]).unwrap();
        let orders = vec![0, 2, 4];
        let sys = MomentSystem::new(6, orders.clone(), spline.norms_at(&orders).unwrap(), Magnitude::Fixed(1.0)).unwrap();
        for guess in [[6.0, 5.9, 0.01], [0.3, 0.2, 0.1], [20.0, 1.0, 0.9]] {
            let s = solve_fixed_count(&sys, &guess).unwrap();
            for (a, b) in s.knots().iter().zip(spline.knots()) {
                assert_relative_eq!(*a, *b, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn large_scale_targets() {
        // Knots near 1e3 with r = 8: powers span 24 decades.
        let knots = [1500.0, 1200.0, 700.0];
        let spline = AlternatingSpline::new(8, 1e-9, knots.to_vec()).unwrap();
        let orders = vec![3, 5, 7];
        let targets = orders.iter().map(|&k| spline.norm(k)).collect();
        let sys = MomentSystem::new(8, orders, targets, Magnitude::Fixed(1e-9)).unwrap();
        let s = solve_fixed_count(&sys, &[1600.0, 1000.0, 500.0]).unwrap();
        for (a, b) in s.knots().iter().zip(knots) {
            assert_relative_eq!(*a, b, max_relative = 1e-10);
        }
    }
}
