//! Brute-force cross-checks: random r-monotone functions, grid-sampled norms
//! and the end-to-end realizability suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admissibility::{decide, extremal_checks, DecisionConfig, SplineType, Verdict};
use crate::error::{Error, Result};
use crate::numeric::relative_difference;
use crate::solver::{solve_fixed_count, vandermonde_log_det, Magnitude, MomentSystem};
use crate::spline::{check_order, AlternatingSpline, validate_r_monotone, MonotoneSpline, NormTargets, OrderSpec, TruncatedPower};

/// Largest order the generator accepts.
pub const MAX_GENERATOR_ORDER: u32 = 12;
/// Largest number of truncated powers the generator accepts.
pub const MAX_PIECES: usize = 10;
/// Most doublings [`numeric_sup_norm`] may use.
pub const MAX_REFINEMENTS: u32 = 12;

const BASE_GRID: usize = 33;
const GRID_AGREEMENT: f64 = 1e-9;
/// Witness norms must reproduce the measured norms this closely.
const WITNESS_TOLERANCE: f64 = 1e-9;
/// Grid and exact norms must agree this closely.
const GRID_TOLERANCE: f64 = 1e-8;

/// Parameters of [`generate`]; the seed fully determines the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub r: u32,
    pub pieces: usize,
    /// Knots are drawn uniformly from this closed interval of positive numbers.
    pub knot_range: (f64, f64),
    /// Prefix sums of the coefficients are drawn uniformly from this interval.
    pub coefficient_range: (f64, f64),
    /// Fixed constant term; when absent a constant from `coefficient_range` is added with probability one half.
    pub constant: Option<f64>,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(r: u32, pieces: usize, seed: u64) -> Self {
        Self {
            r,
            pieces,
            knot_range: (0.2, 4.0),
            coefficient_range: (0.1, 2.0),
            constant: Some(0.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_order(self.r)?;
        if self.r > MAX_GENERATOR_ORDER {
            return Err(Error::invalid("r", format!("at most {MAX_GENERATOR_ORDER}")));
        }
        if self.pieces > MAX_PIECES {
            return Err(Error::invalid("pieces", format!("at most {MAX_PIECES}")));
        }
        check_range("knot_range", self.knot_range)?;
        check_range("coefficient_range", self.coefficient_range)?;
        if let Some(c) = self.constant {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::invalid("constant", "must be finite and nonnegative"));
            }
        }
        Ok(())
    }
}

fn check_range(field: &'static str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
        return Err(Error::invalid(field, format!("[{lo}, {hi}] is not a positive interval")));
    }
    Ok(())
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// Draws an r-monotone truncated-power combination.
///
/// Prefix sums of the coefficients are drawn nonnegative and differenced,
/// so every draw is r-monotone by construction.
pub fn generate(config: &GeneratorConfig) -> Result<MonotoneSpline> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut knots: Vec<f64> = Vec::with_capacity(config.pieces);
    while knots.len() < config.pieces {
        let b = uniform(&mut rng, config.knot_range);
        if !knots.contains(&b) {
            knots.push(b);
        } else if config.knot_range.0 == config.knot_range.1 {
            return Err(Error::invalid("knot_range", "a degenerate range holds only one knot"));
        }
    }
    knots.sort_by(|a, b| b.total_cmp(a));
    let mut previous = 0.0;
    let terms = knots
        .into_iter()
        .map(|b| {
            let prefix = uniform(&mut rng, config.coefficient_range);
            let c = prefix - previous;
            previous = prefix;
            (b, c)
        })
        .collect();
    let constant = match config.constant {
        Some(c) => c,
        None if rng.gen_bool(0.5) => uniform(&mut rng, config.coefficient_range),
        None => 0.0,
    };
    MonotoneSpline::new(config.r, terms, constant)
}

/// Supremum of `|x^(k)|` sampled on `[-(largest knot) - 1, 0]`.
///
/// The grid holds the breakpoints and a uniform mesh that doubles until two
/// successive maxima agree to relative 1e-9.
pub fn numeric_sup_norm<S: TruncatedPower + ?Sized>(x: &S, k: u32, refinements: u32) -> Result<f64> {
    if k > x.order() {
        return Err(Error::invalid("k", format!("derivative order {k} exceeds r = {}", x.order())));
    }
    if refinements > MAX_REFINEMENTS {
        return Err(Error::invalid("refinements", format!("at most {MAX_REFINEMENTS}")));
    }
    let left = -x.largest_knot() - 1.0;
    let mut breaks = 0.0_f64;
    for t in x.breakpoints() {
        breaks = breaks.max(x.eval_derivative(k, t)?.abs());
    }
    let mut previous: Option<f64> = None;
    let mut points = BASE_GRID;
    for _ in 0..=refinements {
        let step = -left / (points - 1) as f64;
        let mut sup = breaks;
        for i in 0..points {
            let t = if i + 1 == points { 0.0 } else { left + step * i as f64 };
            sup = sup.max(x.eval_derivative(k, t)?.abs());
        }
        if let Some(p) = previous {
            if (sup - p).abs() <= GRID_AGREEMENT * sup {
                return Ok(sup);
            }
        }
        previous = Some(sup);
        points = 2 * points - 1;
    }
    Err(Error::numerical(0, format!("grid maximum of order {k} did not settle after {refinements} doublings")))
}

/// Shape of the random problems in [`comparison_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteDims {
    pub max_r: u32,
    pub max_d: usize,
    pub max_pieces: usize,
}

impl Default for SuiteDims {
    fn default() -> Self {
        Self {
            max_r: 6,
            max_d: 5,
            max_pieces: 6,
        }
    }
}

/// One failed assertion, replayable from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub orders: Vec<u32>,
    pub norms: Vec<f64>,
    pub stage: String,
    pub message: String,
}

/// Aggregate outcome of [`comparison_suite`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub trials: usize,
    pub seed: u64,
    pub admissible: usize,
    pub top_order_trials: usize,
    pub below_top_trials: usize,
    pub type_counts: TypeCounts,
    pub extremal_checks: usize,
    pub extremal_passed: usize,
    pub flip_trials: usize,
    pub flip_passed: usize,
    /// Smallest relative signed difference over all extremal checks.
    pub worst_extremal_margin: f64,
    /// Largest relative mismatch between witness and measured norms.
    pub worst_witness_residual: f64,
    /// Largest relative mismatch between grid and exact norms.
    pub worst_grid_residual: f64,
    pub failures: Vec<TrialFailure>,
}

impl SuiteReport {
    pub fn failure_count(&self) -> usize {
        self.failures.len()
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TypeCounts {
    pub type1: usize,
    pub type2: usize,
    pub type3: usize,
    pub extended: usize,
}

#[derive(Debug, Default)]
struct TrialOutcome {
    top_order: bool,
    spline_type: Option<SplineType>,
    extremal_checks: usize,
    extremal_passed: usize,
    flipped: Option<bool>,
    worst_extremal_margin: f64,
    witness_residual: f64,
    grid_residual: f64,
    failures: Vec<TrialFailure>,
}

/// Seed of trial `index`, derived from the suite seed.
pub fn trial_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.gen()
}

/// Realizability suite: every generated function must yield admissible norms,
/// its witness must satisfy the extremal sign pattern, and cutting the lowest
/// norm to a tenth of its bound must be rejected.
///
/// Trials run in parallel and never abort the suite; failures are collected.
pub fn comparison_suite(trials: usize, dims: SuiteDims, seed: u64, config: &DecisionConfig) -> Result<SuiteReport> {
    if trials == 0 {
        return Err(Error::invalid("trials", "at least one trial is required"));
    }
    if dims.max_r == 0 || dims.max_r > MAX_GENERATOR_ORDER || dims.max_d < 2 || dims.max_pieces == 0 || dims.max_pieces > MAX_PIECES {
        return Err(Error::invalid("dims", format!("{dims:?} is out of range")));
    }
    config.validate()?;
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|i| run_trial(i, trial_seed(seed, i), dims, config))
        .collect();

    let mut report = SuiteReport {
        trials,
        seed,
        admissible: 0,
        top_order_trials: 0,
        below_top_trials: 0,
        type_counts: TypeCounts::default(),
        extremal_checks: 0,
        extremal_passed: 0,
        flip_trials: 0,
        flip_passed: 0,
        worst_extremal_margin: f64::INFINITY,
        worst_witness_residual: 0.0,
        worst_grid_residual: 0.0,
        failures: Vec::new(),
    };
    for o in outcomes {
        if o.top_order {
            report.top_order_trials += 1;
        } else {
            report.below_top_trials += 1;
        }
        if let Some(t) = o.spline_type {
            report.admissible += 1;
            match t {
                SplineType::Type1 => report.type_counts.type1 += 1,
                SplineType::Type2 => report.type_counts.type2 += 1,
                SplineType::Type3 => report.type_counts.type3 += 1,
                SplineType::Extended => report.type_counts.extended += 1,
                SplineType::None => {}
            }
        }
        report.extremal_checks += o.extremal_checks;
        report.extremal_passed += o.extremal_passed;
        if let Some(flipped) = o.flipped {
            report.flip_trials += 1;
            report.flip_passed += usize::from(flipped);
        }
        report.worst_extremal_margin = report.worst_extremal_margin.min(o.worst_extremal_margin);
        report.worst_witness_residual = report.worst_witness_residual.max(o.witness_residual);
        report.worst_grid_residual = report.worst_grid_residual.max(o.grid_residual);
        report.failures.extend(o.failures);
    }
    Ok(report)
}

/// Draws the function and order subset of one trial.
pub fn trial_problem(seed: u64, dims: SuiteDims) -> (GeneratorConfig, OrderSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rng.gen_range(1..=dims.max_r);
    let pieces = rng.gen_range(1..=dims.max_pieces);
    let mut generator = GeneratorConfig::new(r, pieces, rng.gen());
    generator.constant = None;
    // Orders below r need at least two of them.
    let top_order = r < 2 || rng.gen_bool(0.5);
    let pool: Vec<u32> = (0..r).collect();
    let max_d = dims.max_d.min(if top_order { r as usize + 1 } else { r as usize });
    let d = rng.gen_range(2..=max_d);
    let picks = if top_order { d - 1 } else { d };
    let mut orders = rand::seq::index::sample(&mut rng, pool.len(), picks)
        .into_iter()
        .map(|i| pool[i])
        .collect::<Vec<_>>();
    if top_order {
        orders.push(r);
    }
    orders.sort_unstable();
    let spec = OrderSpec::new(r, orders).expect("drawn orders are valid");
    (generator, spec)
}

fn run_trial(trial: usize, seed: u64, dims: SuiteDims, config: &DecisionConfig) -> TrialOutcome {
    let (generator, spec) = trial_problem(seed, dims);
    let mut out = TrialOutcome {
        top_order: spec.ends_at_r(),
        worst_extremal_margin: f64::INFINITY,
        ..TrialOutcome::default()
    };
    let mut norms = Vec::new();
    let fail = |out: &mut TrialOutcome, norms: &[f64], stage: &str, message: String| {
        out.failures.push(TrialFailure {
            trial,
            seed,
            generator: generator.clone(),
            orders: spec.orders().to_vec(),
            norms: norms.to_vec(),
            stage: stage.to_string(),
            message,
        });
    };

    let x = match generate(&generator) {
        Ok(x) => x,
        Err(e) => {
            fail(&mut out, &norms, "generate", e.to_string());
            return out;
        }
    };
    match validate_r_monotone(&x, config.grid_size) {
        Ok(d) if d.is_ok() => {}
        Ok(d) => fail(&mut out, &norms, "generate", format!("not r-monotone: {d:?}")),
        Err(e) => fail(&mut out, &norms, "generate", e.to_string()),
    }
    norms = match x.measure_norms(&spec) {
        Ok(n) => n,
        Err(e) => {
            fail(&mut out, &norms, "measure", e.to_string());
            return out;
        }
    };
    for (&k, &m) in spec.orders().iter().zip(&norms) {
        match numeric_sup_norm(&x, k, MAX_REFINEMENTS) {
            Ok(g) => {
                let residual = (g - m).abs() / m;
                out.grid_residual = out.grid_residual.max(residual);
                if residual > GRID_TOLERANCE {
                    fail(&mut out, &norms, "grid", format!("order {k}: grid {g}, exact {m}"));
                }
            }
            Err(e) => fail(&mut out, &norms, "grid", e.to_string()),
        }
    }

    let verdict = match NormTargets::for_spec(&spec, norms.clone()).and_then(|t| decide(&spec, &t, config)) {
        Ok(v) => v,
        Err(e) => {
            fail(&mut out, &norms, "decide", e.to_string());
            return out;
        }
    };
    if !verdict.admissible {
        fail(
            &mut out,
            &norms,
            "decide",
            format!("inadmissible at index {} with margins {:?}", verdict.binding_stage, verdict.margins),
        );
        return out;
    }
    out.spline_type = Some(verdict.spline_type);
    let witness = verdict.witness.as_ref().expect("admissible verdicts carry a witness");
    for (&k, &m) in spec.orders().iter().zip(&norms) {
        let residual = (witness.norm(k) - m).abs() / m;
        out.witness_residual = out.witness_residual.max(residual);
        if residual > WITNESS_TOLERANCE {
            fail(&mut out, &norms, "witness", format!("order {k}: witness {}, target {m}", witness.norm(k)));
        }
    }
    if verdict.spline_type == SplineType::Type3 && spec.orders()[0] != 0 {
        fail(&mut out, &norms, "witness", "a constant is absorbed above order 0".into());
    }

    match extremal_checks(&x, &verdict, &spec) {
        Ok(reports) => {
            for report in reports {
                out.extremal_checks += 1;
                let scale = report.x_norm.abs().max(report.witness_norm.abs());
                if scale > 0.0 {
                    out.worst_extremal_margin = out.worst_extremal_margin.min(report.signed_difference / scale);
                }
                if report.passed {
                    out.extremal_passed += 1;
                } else {
                    fail(&mut out, &norms, "extremal", format!("{report:?}"));
                }
            }
        }
        Err(e) => fail(&mut out, &norms, "extremal", e.to_string()),
    }

    if spec.d() >= 3 {
        match flip_lowest(&spec, &norms, &verdict, config) {
            Ok(flipped) => {
                out.flipped = Some(flipped);
                if !flipped {
                    fail(&mut out, &norms, "flip", "a tenth of the lowest bound stayed admissible".into());
                }
            }
            Err(e) => {
                out.flipped = Some(false);
                fail(&mut out, &norms, "flip", e.to_string());
            }
        }
    }
    out
}

/// Replaces the lowest target by a tenth of the bound it was compared with
/// and reports whether the result is rejected.
fn flip_lowest(spec: &OrderSpec, norms: &[f64], verdict: &Verdict, config: &DecisionConfig) -> Result<bool> {
    let margin = verdict.margins[0].ok_or_else(|| Error::invalid("verdict", "lowest order was never compared"))?;
    let bound = norms[0] - margin;
    let mut lowered = norms.to_vec();
    lowered[0] = bound / 10.0;
    let targets = NormTargets::for_spec(spec, lowered)?;
    Ok(!decide(spec, &targets, config)?.admissible)
}

/// Largest order drawn by [`round_trip_suite`].
pub const ROUND_TRIP_MAX_ORDER: u32 = 8;
/// Most knots drawn by [`round_trip_suite`].
pub const ROUND_TRIP_MAX_KNOTS: usize = 6;
/// Recovered knots must match the drawn ones this closely.
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-8;
/// Relative perturbation of each gap in the starting guesses.
pub const ROUND_TRIP_SPREAD: f64 = 0.1;

/// Outcome of [`round_trip_suite`] or [`vandermonde_suite`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub trials: usize,
    pub seed: u64,
    /// Largest relative knot error, or the smallest log determinant for Vandermonde runs.
    pub worst: f64,
    /// Reproduction seeds and messages of failed trials.
    pub failures: Vec<(u64, String)>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A random spline and a square system of its own norms, for recovery tests.
pub fn round_trip_instance(seed: u64) -> (AlternatingSpline, MomentSystem) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = rng.gen_range(1..=ROUND_TRIP_MAX_ORDER);
    let s = rng.gen_range(1..=ROUND_TRIP_MAX_KNOTS.min(r as usize));
    // Gaps bounded below keep the system well conditioned.
    let mut knots = vec![rng.gen_range(0.1..1.0)];
    for _ in 1..s {
        let next = knots[knots.len() - 1] + rng.gen_range(0.1..1.0);
        knots.push(next);
    }
    knots.reverse();
    let l = rng.gen_range(0.5..2.0);
    let spline = AlternatingSpline::new(r, l, knots).expect("drawn knots are ordered");
    let mut orders: Vec<u32> = rand::seq::index::sample(&mut rng, r as usize + 1, s + 1)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    orders.sort_unstable();
    // Order r pins the magnitude; otherwise it is an unknown.
    let magnitude = if orders.last() == Some(&r) {
        orders.pop();
        Magnitude::Fixed(l)
    } else {
        Magnitude::Free
    };
    let targets = spline.norms_at(&orders).expect("orders within r");
    let system = MomentSystem::new(r, orders, targets, magnitude).expect("square system");
    (spline, system)
}

/// Knots perturbed by up to `spread` relative in every gap, still ordered.
pub fn perturbed_knots(knots: &[f64], spread: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; knots.len()];
    let mut below = 0.0;
    for i in (0..knots.len()).rev() {
        let gap = knots[i] - if i + 1 < knots.len() { knots[i + 1] } else { 0.0 };
        below += gap * (1.0 + rng.gen_range(-spread..=spread));
        out[i] = below;
    }
    out
}

/// Recovers random splines from their norms, starting from two perturbed guesses.
pub fn round_trip_suite(trials: usize, seed: u64) -> InvariantReport {
    let outcomes: Vec<(f64, Option<(u64, String)>)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let trial = trial_seed(seed, i);
            let (spline, system) = round_trip_instance(trial);
            let mut rng = ChaCha8Rng::seed_from_u64(trial ^ 0x5eed);
            let mut worst = 0.0f64;
            for _ in 0..2 {
                let guess = perturbed_knots(spline.knots(), ROUND_TRIP_SPREAD, &mut rng);
                let solved = match solve_fixed_count(&system, &guess) {
                    Ok(s) => s,
                    Err(e) => return (f64::INFINITY, Some((trial, e.to_string()))),
                };
                for (a, b) in solved.knots().iter().zip(spline.knots()) {
                    worst = worst.max(relative_difference(*a, *b));
                }
                worst = worst.max(relative_difference(solved.l(), spline.l()));
            }
            let failure = (worst > ROUND_TRIP_TOLERANCE).then(|| (trial, format!("knot error {worst:e}")));
            (worst, failure)
        })
        .collect();
    InvariantReport {
        trials,
        seed,
        worst: outcomes.iter().map(|o| o.0).fold(0.0, f64::max),
        failures: outcomes.into_iter().filter_map(|o| o.1).collect(),
    }
}

/// Decreasing positive nodes and decreasing real exponents, dimension 1 to 8.
pub fn vandermonde_instance(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=8);
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..5.0)).collect();
    let mut exponents: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..12.0)).collect();
    x.sort_by(|a, b| b.total_cmp(a));
    exponents.sort_by(|a, b| b.total_cmp(a));
    x.dedup();
    exponents.dedup();
    let n = x.len().min(exponents.len());
    x.truncate(n);
    exponents.truncate(n);
    (x, exponents)
}

/// Positivity of generalized Vandermonde determinants on random ordered input.
pub fn vandermonde_suite(trials: usize, seed: u64) -> InvariantReport {
    let outcomes: Vec<(f64, Option<(u64, String)>)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let trial = trial_seed(seed, i);
            let (x, exponents) = vandermonde_instance(trial);
            // The sign is decided separately from the magnitude, which may underflow.
            match vandermonde_log_det(&x, &exponents) {
                Ok((sign, log_abs)) if sign > 0.0 => (log_abs, None),
                Ok((_, log_abs)) => (log_abs, Some((trial, format!("negative determinant, log magnitude {log_abs}")))),
                Err(e) => (f64::NEG_INFINITY, Some((trial, e.to_string()))),
            }
        })
        .collect();
    InvariantReport {
        trials,
        seed,
        worst: outcomes.iter().map(|o| o.0).fold(f64::INFINITY, f64::min),
        failures: outcomes.into_iter().filter_map(|o| o.1).collect(),
    }
}
