//! Acceptance criteria. Runs without the libtest harness so that every
//! criterion prints exactly one PASS or FAIL line; exits nonzero if any fails.
//!
//! Expected values come from hand solves and from oracles local to this file.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use multimonotone::admissibility::{decide_values, estimate_limit, olov_bound, Certainty, DecisionConfig, SplineType, Verdict};
use multimonotone::oracle::{comparison_suite, generate, numeric_sup_norm, GeneratorConfig, SuiteDims, MAX_REFINEMENTS};
use multimonotone::solver::{solve_fixed_count, solve_min_l, vandermonde_log_det, Magnitude, MomentSystem};
use multimonotone::spline::{AlternatingSpline, OrderSpec, ScaleTransform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn config() -> DecisionConfig {
    DecisionConfig::default()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn run(label: &str, budget: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = f();
    let elapsed = start.elapsed();
    let outcome = outcome.and_then(|detail| {
        if elapsed <= budget {
            Ok(detail)
        } else {
            Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}"))
        }
    });
    match &outcome {
        Ok(detail) => println!("PASS {label} ({detail}; {elapsed:.2?})"),
        Err(why) => println!("FAIL {label}: {why}"),
    }
    outcome.is_ok()
}

fn decide(r: u32, orders: &[u32], norms: &[f64]) -> Result<Verdict, String> {
    decide_values(r, orders, norms, &config()).map_err(|e| format!("decide({r}, {orders:?}, {norms:?}): {e}"))
}

/// Alternating sum `l/(r-k)! * sum (-1)^(j+1) a_j^(r-k)`, written out directly.
fn direct_norm(r: u32, k: u32, l: f64, knots: &[f64]) -> f64 {
    if k == r {
        return if knots.is_empty() { 0.0 } else { l };
    }
    let p = (r - k) as i32;
    let fact: f64 = (1..=p).map(f64::from).product();
    let sum: f64 = knots
        .iter()
        .enumerate()
        .map(|(j, a)| if j % 2 == 0 { a.powi(p) } else { -a.powi(p) })
        .sum();
    l / fact * sum
}

/// Three-order threshold at r = 2 from the one-knot hand solve:
/// `l = M2`, `l a = M1`, so `M0 >= l a^2 / 2 = M1^2 / (2 M2)`.
fn second_order_bound(m1: f64, m2: f64) -> f64 {
    m1 * m1 / (2.0 * m2)
}

fn criterion_1() -> Outcome {
    let bound = second_order_bound(1.0, 1.0);
    let below = decide(2, &[0, 1, 2], &[bound * (1.0 - 1e-8), 1.0, 1.0])?;
    let at = decide(2, &[0, 1, 2], &[bound, 1.0, 1.0])?;
    let above = decide(2, &[0, 1, 2], &[bound * (1.0 + 1e-8), 1.0, 1.0])?;
    ensure(!below.admissible, || "just below 0.5 should be inadmissible".into())?;
    ensure(at.admissible && at.spline_type == SplineType::Type2, || format!("at 0.5: {:?}", at.spline_type))?;
    ensure(above.admissible && above.spline_type == SplineType::Type1, || {
        format!("just above 0.5: {:?}", above.spline_type)
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        let (m1, m2) = (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
        let expected = second_order_bound(m1, m2);
        let library = olov_bound(2, 0, 1, m1, m2).map_err(|e| e.to_string())?;
        ensure(rel(library, expected) <= 1e-12, || format!("olov_bound({m1}, {m2}) = {library}, expected {expected}"))?;
        for (theta, admissible) in [(1.0 - 1e-6, false), (1.0 + 1e-6, true)] {
            let v = decide(2, &[0, 1, 2], &[theta * expected, m1, m2])?;
            ensure(v.admissible == admissible, || format!("({m1}, {m2}) at theta {theta}: admissible {}", v.admissible))?;
        }
    }
    Ok("flip at 0.5; 100 random pairs agree".into())
}

fn criterion_2() -> Outcome {
    let sixth = 1.0 / 6.0;
    let v = decide(3, &[0, 1, 2, 3], &[sixth * (1.0 - 1e-6), 0.5, 1.0, 1.0])?;
    ensure(!v.admissible, || "M0 < 1/6 should be inadmissible".into())?;
    let v = decide(3, &[0, 1, 2, 3], &[sixth, 0.5, 1.0, 1.0])?;
    ensure(v.spline_type == SplineType::Type2, || format!("M0 = 1/6: {:?}", v.spline_type))?;
    for m0 in [0.2, 0.5, 3.0] {
        let v = decide(3, &[0, 1, 2, 3], &[m0, 0.5, 1.0, 1.0])?;
        let c = v.witness.as_ref().map(|w| w.constant()).unwrap_or(f64::NAN);
        ensure(v.spline_type == SplineType::Type3 && rel(c, m0 - sixth) <= 1e-12, || {
            format!("M0 = {m0}: {:?} with constant {c}", v.spline_type)
        })?;
    }

    // Hand solve with l = 1: a1 - a2 = 1 and (a1^2 - a2^2) / 2 = 0.6 give (1.1, 0.1).
    let bound = (1.1f64.powi(3) - 0.1f64.powi(3)) / 6.0;
    let v = decide(3, &[0, 1, 2, 3], &[bound * (1.0 - 1e-6), 0.6, 1.0, 1.0])?;
    ensure(!v.admissible, || "below the two-knot bound should be inadmissible".into())?;
    for m0 in [bound * (1.0 + 1e-6), 0.3, 2.0] {
        let v = decide(3, &[0, 1, 2, 3], &[m0, 0.6, 1.0, 1.0])?;
        ensure(v.spline_type == SplineType::Type1, || format!("M0 = {m0}: {:?}", v.spline_type))?;
        let stage = v
            .stages
            .iter()
            .find(|s| s.knot_count() == 2)
            .ok_or_else(|| "no two-knot stage".to_string())?;
        ensure(rel(stage.knots()[0], 1.1) <= 1e-8 && rel(stage.knots()[1], 0.1) <= 1e-8, || {
            format!("stage knots {:?}", stage.knots())
        })?;
        let w = v.witness.as_ref().expect("admissible");
        for (k, m) in [(0, m0), (1, 0.6), (2, 1.0), (3, 1.0)] {
            let n = direct_norm(3, k, w.l(), w.knots());
            ensure(rel(n, m) <= 1e-8, || format!("witness order {k}: {n} vs {m}"))?;
        }
    }
    Ok(format!("ladder at 1/6; stage knots (1.1, 0.1), bound {bound:.9}"))
}

fn criterion_3() -> Outcome {
    // Two knots a > b with l: l (a - b) = 1 and l (a^2 - b^2) / 2 = 1 give
    // a + b = 2, a - b = 1/l, and then bound(l) = l (a^3 - b^3) / 6 = 1/2 + 1/(24 l^2).
    let closed = |l: f64| 0.5 + 1.0 / (24.0 * l * l);
    let est = estimate_limit(3, 0, &[1, 2], &[1.0, 1.0], &config()).map_err(|e| e.to_string())?;
    ensure((est.limit - 0.5).abs() <= 1e-6 * 0.5, || format!("limit {}", est.limit))?;
    ensure(est.monotone, || "samples flagged nonmonotone".into())?;
    for w in est.samples.windows(2) {
        ensure(w[1].1 <= w[0].1 * (1.0 + 1e-9), || format!("samples increase: {:?}", w))?;
    }
    for &(l, b) in &est.samples {
        ensure(rel(b, closed(l)) <= 1e-9, || format!("bound({l}) = {b}, closed form {}", closed(l)))?;
    }

    let min = solve_min_l(3, &[1, 2], &[1.0, 1.0]).map_err(|e| e.to_string())?;
    let knot = min.spline().map(|s| s.knots()[0]).unwrap_or(f64::NAN);
    ensure(rel(min.l(), 0.5) <= 1e-8 && rel(knot, 2.0) <= 1e-8, || format!("l_min {} knot {knot}", min.l()))?;

    ensure(decide(3, &[0, 1, 2], &[0.6, 1.0, 1.0])?.admissible, || "0.6 should be admissible".into())?;
    let v = decide(3, &[0, 1, 2], &[0.45, 1.0, 1.0])?;
    ensure(!v.admissible, || "0.45 should be inadmissible".into())?;
    let v = decide(3, &[0, 1, 2], &[0.5, 1.0, 1.0])?;
    ensure(!v.admissible && v.certainty == Certainty::BoundaryAtTolerance, || {
        format!("0.5: admissible {} certainty {:?}", v.admissible, v.certainty)
    })?;
    Ok(format!("limit {:.12}, {} samples", est.limit, est.samples.len()))
}

/// Random well-separated spline and a square system of its own norms.
fn round_trip_case(rng: &mut ChaCha8Rng) -> (AlternatingSpline, MomentSystem) {
    let r = rng.gen_range(1..=8u32);
    let s = rng.gen_range(1..=6usize.min(r as usize));
    let mut knots = Vec::with_capacity(s);
    let mut a = 0.0;
    for _ in 0..s {
        a += rng.gen_range(0.1..1.0);
        knots.push(a);
    }
    knots.reverse();
    let l = rng.gen_range(0.5..2.0);
    let mut orders: Vec<u32> = (0..=r).collect();
    while orders.len() > s + 1 {
        orders.remove(rng.gen_range(0..orders.len()));
    }
    let magnitude = if orders.last() == Some(&r) {
        orders.pop();
        Magnitude::Fixed(l)
    } else {
        Magnitude::Free
    };
    let targets = orders.iter().map(|&k| direct_norm(r, k, l, &knots)).collect();
    let spline = AlternatingSpline::new(r, l, knots).expect("ordered knots");
    let system = MomentSystem::new(r, orders, targets, magnitude).expect("square system");
    (spline, system)
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0f64;
    for trial in 0..10_000 {
        let (truth, system) = round_trip_case(&mut rng);
        let mut runs = Vec::new();
        for _ in 0..2 {
            // Every gap perturbed by up to 10%.
            let mut guess = Vec::new();
            let mut below = 0.0;
            for (i, &a) in truth.knots().iter().enumerate().rev() {
                let next = truth.knots().get(i + 1).copied().unwrap_or(0.0);
                below += (a - next) * rng.gen_range(0.9..1.1);
                guess.push(below);
            }
            guess.reverse();
            let solved = solve_fixed_count(&system, &guess).map_err(|e| format!("trial {trial} {truth:?}: {e}"))?;
            for (x, y) in solved.knots().iter().zip(truth.knots()) {
                worst = worst.max(rel(*x, *y));
            }
            worst = worst.max(rel(solved.l(), truth.l()));
            runs.push(solved);
        }
        ensure(worst <= 1e-8, || format!("trial {trial} {truth:?}: knot error {worst:e}"))?;
        for (x, y) in runs[0].knots().iter().zip(runs[1].knots()) {
            ensure(rel(*x, *y) <= 1e-8, || format!("trial {trial}: runs disagree"))?;
        }
    }
    Ok(format!("10^4 instances, worst relative error {worst:.2e}"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut count = 0;
    while count < 100_000 {
        let n = rng.gen_range(1..=8);
        let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..10.0)).collect();
        let mut e: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..15.0)).collect();
        x.sort_by(|a, b| b.total_cmp(a));
        e.sort_by(|a, b| b.total_cmp(a));
        if x.windows(2).any(|w| w[0] == w[1]) || e.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        let (sign, _) = vandermonde_log_det(&x, &e).map_err(|err| format!("{x:?} {e:?}: {err}"))?;
        ensure(sign > 0.0, || format!("nonpositive determinant at nodes {x:?}, exponents {e:?}"))?;
        count += 1;
    }
    // Classical case as a spot check: integer exponents give prod (x_i - x_j).
    let (sign, log_abs) = vandermonde_log_det(&[3.0, 2.0, 1.0], &[2.0, 1.0, 0.0]).map_err(|e| e.to_string())?;
    ensure(sign > 0.0 && (log_abs - 2f64.ln()).abs() <= 1e-12, || format!("classical 3x3: {sign} {log_abs}"))?;
    Ok("10^5 determinants positive".into())
}

fn criterion_6() -> Outcome {
    let dims = SuiteDims {
        max_r: 6,
        max_d: 5,
        max_pieces: 6,
    };
    let report = comparison_suite(1000, dims, 606, &config()).map_err(|e| e.to_string())?;
    ensure(report.failures.is_empty(), || format!("{} failures, first {:?}", report.failures.len(), report.failures[0]))?;
    ensure(report.admissible == report.trials, || format!("admissible {}/{}", report.admissible, report.trials))?;
    ensure(report.top_order_trials > 0 && report.below_top_trials > 0, || "both order families must occur".into())?;
    ensure(report.extremal_passed == report.extremal_checks, || {
        format!("extremal {}/{}", report.extremal_passed, report.extremal_checks)
    })?;
    ensure(report.flip_trials > 0 && report.flip_passed == report.flip_trials, || {
        format!("flips {}/{}", report.flip_passed, report.flip_trials)
    })?;
    Ok(format!(
        "1000 trials ({} to r, {} below r), extremal {}/{}, flips {}/{}",
        report.top_order_trials,
        report.below_top_trials,
        report.extremal_passed,
        report.extremal_checks,
        report.flip_passed,
        report.flip_trials
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let r = rng.gen_range(1..=8u32);
        let s = rng.gen_range(1..=6usize);
        let mut knots: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..5.0)).collect();
        knots.sort_by(|a, b| b.total_cmp(a));
        knots.dedup();
        let spline = AlternatingSpline::with_constant(r, rng.gen_range(0.1..3.0), knots, rng.gen_range(0.0..1.0))
            .map_err(|e| e.to_string())?;
        let spec = OrderSpec::new(r, (0..=r).collect()).map_err(|e| e.to_string())?;
        let closed = spline.closed_form_norms(&spec).map_err(|e| e.to_string())?;
        // Sample the generic representation so no closed-form code is shared.
        let general = spline.to_monotone();
        for k in 0..=r {
            let grid = numeric_sup_norm(&general, k, MAX_REFINEMENTS).map_err(|e| e.to_string())?;
            let err = rel(grid, closed[k as usize]);
            worst = worst.max(err);
            ensure(err <= 1e-8, || format!("{spline:?} order {k}: grid {grid} closed {}", closed[k as usize]))?;
        }
    }
    Ok(format!("10^3 splines, worst relative gap {worst:.2e}"))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut done = 0;
    let mut worst = 0.0f64;
    while done < 100 {
        let r = rng.gen_range(2..=6u32);
        let x = generate(&GeneratorConfig::new(r, rng.gen_range(1..=5), rng.gen())).map_err(|e| e.to_string())?;
        let d = rng.gen_range(2..=(r as usize + 1).min(5));
        let mut orders: Vec<u32> = (0..=r).collect();
        while orders.len() > d {
            orders.remove(rng.gen_range(0..orders.len()));
        }
        let norms = x.measure_norms_at(&orders).map_err(|e| e.to_string())?;
        let original = decide(r, &orders, &norms)?;
        if !original.admissible {
            return Err(format!("measured norms of a generated function rejected: {orders:?} {norms:?}"));
        }
        let (alpha, lambda) = (rng.gen_range(0.1..10.0), rng.gen_range(0.1..10.0));
        let t = ScaleTransform::new(alpha, lambda).map_err(|e| e.to_string())?;
        let scaled_norms: Vec<f64> = orders.iter().zip(&norms).map(|(&k, m)| m * alpha * lambda.powi(k as i32)).collect();
        let scaled = decide(r, &orders, &scaled_norms)?;
        ensure(scaled.admissible && scaled.spline_type == original.spline_type, || {
            format!("{orders:?} {norms:?} at ({alpha}, {lambda}): {:?} vs {:?}", scaled.spline_type, original.spline_type)
        })?;
        let expected = original.witness.as_ref().expect("admissible").rescale(&t);
        let got = scaled.witness.as_ref().expect("admissible");
        ensure(got.knot_count() == expected.knot_count(), || "knot counts differ".into())?;
        let mut pairs = vec![(got.l(), expected.l())];
        pairs.extend(got.knots().iter().copied().zip(expected.knots().iter().copied()));
        if expected.constant() > 0.0 || got.constant() > 0.0 {
            pairs.push((got.constant(), expected.constant()));
        }
        for (a, b) in pairs {
            let err = rel(a, b);
            worst = worst.max(err);
            ensure(err <= 1e-8, || format!("{orders:?} {norms:?} at ({alpha}, {lambda}): {a} vs {b}"))?;
        }
        done += 1;
    }
    Ok(format!("100 instances, worst relative witness gap {worst:.2e}"))
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        run("1 three-order boundary at r = 2", secs(5), criterion_1),
        run("2 type ladder at r = 3", secs(1), criterion_2),
        run("3 large-magnitude limit below r", secs(5), criterion_3),
        run("4 round-trip uniqueness", secs(60), criterion_4),
        run("5 Vandermonde positivity", secs(30), criterion_5),
        run("6 end-to-end realizability", secs(600), criterion_6),
        run("7 closed-form norms vs grid", secs(60), criterion_7),
        run("8 scaling equivariance", secs(60), criterion_8),
    ];
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
