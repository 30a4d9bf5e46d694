use crate::error::{Error, Result};
use crate::solver::{normalizing, single_knot, solve_for_l, solve_min_l, staged_fit, MinimalMagnitude, StageOutcome};
use crate::spline::{AlternatingSpline, NormTargets, OrderSpec, ScaleTransform};

use super::limit::estimate_limit;
use super::verdict::{Certainty, DecisionConfig, SplineType, Verdict};

/// Decides whether `targets` are the derivative norms of some r-monotone function.
///
/// With the top order equal to `r`, knots are added one order at a time from
/// the top; each target is compared against the norm of the spline matching
/// all higher targets. With every order below `r`, the tail is decided first
/// and the lowest target must strictly exceed the large-magnitude limit.
pub fn decide(spec: &OrderSpec, targets: &NormTargets, config: &DecisionConfig) -> Result<Verdict> {
    config.validate()?;
    if targets.len() != spec.d() {
        return Err(Error::invalid(
            "norms",
            format!("{} norms for {} orders", targets.len(), spec.d()),
        ));
    }
    if spec.ends_at_r() {
        decide_to_r(spec, targets.values(), config)
    } else {
        decide_below_r(spec.r(), spec.orders(), targets.values(), config)
    }
}

fn decide_to_r(spec: &OrderSpec, values: &[f64], config: &DecisionConfig) -> Result<Verdict> {
    let r = spec.r();
    let d = spec.d();
    let orders = &spec.orders()[..d - 1];
    let l = values[d - 1];
    // Unit magnitude and unit knot for the first stage.
    let a = single_knot(r, orders[d - 2], values[d - 2], l);
    let t = normalizing(r, l, a);
    let scaled: Vec<f64> = orders.iter().zip(values).map(|(&k, &m)| m * t.norm_factor(k)).collect();
    let fit = staged_fit(r, orders, &scaled, 1.0, config.equality_tolerance)?;

    let back = t.inverse();
    let mut margins: Vec<Option<f64>> = fit
        .margins
        .iter()
        .zip(orders)
        .map(|(m, &k)| m.map(|v| v / t.norm_factor(k)))
        .collect();
    margins.push(Some(0.0));
    let stages: Vec<AlternatingSpline> = fit.stages.iter().map(|s| exact_magnitude(s.rescale(&back), l)).collect();
    let certainty = if fit.touched_boundary {
        Certainty::BoundaryAtTolerance
    } else {
        Certainty::Certain
    };
    let binding_stage = fit.binding_index();
    let (spline_type, witness) = match fit.outcome {
        StageOutcome::Complete => (SplineType::Type1, stages.last().cloned()),
        StageOutcome::Boundary { constant, .. } => {
            let frozen = stages.last().expect("nonempty stages");
            if constant > 0.0 {
                (SplineType::Type3, Some(frozen.with_offset(constant / t.norm_factor(0))?))
            } else {
                (SplineType::Type2, Some(frozen.clone()))
            }
        }
        StageOutcome::Fails { .. } => {
            let mut verdict = Verdict::inadmissible(binding_stage, margins, certainty);
            verdict.stages = stages;
            return Ok(verdict);
        }
    };
    Ok(Verdict {
        admissible: true,
        spline_type,
        witness,
        binding_stage,
        margins,
        certainty,
        stages,
        r_norm_floor: None,
    })
}

/// Keeps the magnitude bit-exact after a round trip through the normalization.
fn exact_magnitude(spline: AlternatingSpline, l: f64) -> AlternatingSpline {
    spline.with_magnitude(l).expect("positive magnitude")
}

fn decide_below_r(r: u32, orders: &[u32], values: &[f64], config: &DecisionConfig) -> Result<Verdict> {
    let d = orders.len();
    if d == 2 {
        // Always admissible; the minimizer of the r-th norm has one knot.
        let min = solve_min_l(r, orders, values)?;
        let witness = min.spline().cloned().expect("two orders attain their minimum");
        return Ok(Verdict {
            admissible: true,
            spline_type: SplineType::Type1,
            stages: vec![witness.clone()],
            witness: Some(witness),
            binding_stage: 0,
            margins: vec![Some(0.0), Some(0.0)],
            certainty: Certainty::Certain,
            r_norm_floor: Some(min.l()),
        });
    }

    let tail = decide_below_r(r, &orders[1..], &values[1..], config)?;
    let mut margins = vec![None];
    margins.extend(tail.margins.iter().copied());
    if !tail.admissible {
        return Ok(Verdict::inadmissible(tail.binding_stage + 1, margins, tail.certainty));
    }

    let (k1, m1) = (orders[0], values[0]);
    let limit = estimate_limit(r, k1, &orders[1..], &values[1..], config).map_err(|e| restage(e, 0))?;
    let margin = m1 - limit.limit;
    margins[0] = Some(margin);
    let tolerance = config.equality_tolerance;
    if margin <= tolerance * m1 {
        let certainty = if margin.abs() <= tolerance * m1 {
            Certainty::BoundaryAtTolerance
        } else {
            Certainty::Certain
        };
        return Ok(Verdict::inadmissible(0, margins, certainty));
    }

    let min = solve_min_l(r, orders, values).map_err(|e| restage(e, 0))?;
    let mut stages = tail.stages.clone();
    let (spline_type, witness, certainty) = match &min {
        MinimalMagnitude::Interior { spline, .. } => (SplineType::Type1, spline.clone(), Certainty::Certain),
        MinimalMagnitude::Boundary { spline, .. } => (SplineType::Type2, spline.clone(), Certainty::BoundaryAtTolerance),
        MinimalMagnitude::WithConstant { spline, .. } => (SplineType::Type3, spline.clone(), Certainty::Certain),
        MinimalMagnitude::Unattained { l_inf } => {
            let member = solve_for_l(r, orders, values, 2.0 * l_inf).map_err(|e| restage(e, 0))?;
            (SplineType::Extended, member, Certainty::Certain)
        }
    };
    stages.push(witness.clone());
    Ok(Verdict {
        admissible: true,
        spline_type,
        witness: Some(witness),
        binding_stage: 0,
        margins,
        certainty,
        stages,
        r_norm_floor: Some(min.l()),
    })
}

/// Solver failures are reported as numerical failures at `stage`.
fn restage(error: Error, stage: usize) -> Error {
    match error {
        Error::InvalidArgument { .. } | Error::NumericalFailure { .. } => error,
        other => Error::numerical(stage, other.to_string()),
    }
}

/// Convenience wrapper building the order spec and targets.
pub fn decide_values(r: u32, orders: &[u32], norms: &[f64], config: &DecisionConfig) -> Result<Verdict> {
    let spec = OrderSpec::new(r, orders.to_vec())?;
    let targets = NormTargets::for_spec(&spec, norms.to_vec())?;
    decide(&spec, &targets, config)
}

/// The verdict of the transformed targets, predicted from `verdict`.
pub fn rescale_verdict(verdict: &Verdict, spec: &OrderSpec, transform: &ScaleTransform) -> Verdict {
    let mut out = verdict.clone();
    out.witness = verdict.witness.as_ref().map(|w| w.rescale(transform));
    out.stages = verdict.stages.iter().map(|s| s.rescale(transform)).collect();
    out.margins = verdict
        .margins
        .iter()
        .zip(spec.orders())
        .map(|(m, &k)| m.map(|v| v * transform.norm_factor(k)))
        .collect();
    out.r_norm_floor = verdict.r_norm_floor.map(|f| f * transform.norm_factor(spec.r()));
    out
}
