//! Grows a new smallest knot into a one-knot spline while holding its norm of
//! order 1, until the order-0 norm reaches its target.

use multimonotone::solver::{grow_knot, Magnitude, MomentSystem};
use multimonotone::spline::AlternatingSpline;

fn main() -> multimonotone::Result<()> {
    let witness = AlternatingSpline::new(4, 1.0, vec![1.0])?;
    let held = MomentSystem::new(4, vec![1], vec![witness.norm(1)], Magnitude::Fixed(1.0))?;
    for target in [0.05, 0.1, 1.0] {
        let (grown, trace) = grow_knot(&witness, &held, 0, target)?;
        println!(
            "target {target}: knots {:?} after {} steps, {:?}",
            grown.knots(),
            trace.steps.len(),
            trace.termination
        );
        for step in trace.steps.iter().step_by((trace.steps.len() / 5).max(1)) {
            println!("  p = {:.6}  order-0 norm {:.6}", step.grown_knot, step.tracked_norm);
        }
    }
    Ok(())
}
