//! Command-line front end: `check`, `scan`, `selftest` and `eval`.
//!
//! Exit codes: 0 admissible (or success), 1 inadmissible (or failed self-test),
//! 2 invalid input, 3 numerical failure.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admissibility::{decide, Certainty, DecisionConfig, SplineType, Verdict};
use crate::error::Error;
use crate::format::{human, human_list, to_structured};
use crate::oracle::{comparison_suite, round_trip_suite, vandermonde_suite, InvariantReport, SuiteDims, SuiteReport};
use crate::spline::{AlternatingSpline, NormTargets, OrderSpec, TruncatedPower};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INADMISSIBLE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Header of the `scan` output.
pub const SCAN_HEADER: &str = "value,admissible,type,margin";

/// A decision problem as read from a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemDocument {
    pub r: u32,
    pub orders: Vec<u32>,
    pub norms: Vec<f64>,
    #[serde(default, skip_serializing_if = "ConfigOverrides::is_empty")]
    pub config: ConfigOverrides,
}

/// Optional replacements for the [`DecisionConfig`] defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_stages: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
}

impl ConfigOverrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    pub fn apply(&self, base: DecisionConfig) -> DecisionConfig {
        DecisionConfig {
            equality_tolerance: self.tolerance.unwrap_or(base.equality_tolerance),
            limit_factor: self.limit_factor.unwrap_or(base.limit_factor),
            limit_stages: self.limit_stages.unwrap_or(base.limit_stages),
            grid_size: self.grid_size.unwrap_or(base.grid_size),
        }
    }
}

impl ProblemDocument {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("problem document: {e}")))
    }

    /// Checks the document against the order and norm invariants.
    pub fn validate(&self) -> crate::Result<(OrderSpec, NormTargets, DecisionConfig)> {
        let spec = OrderSpec::new(self.r, self.orders.clone())?;
        let targets = NormTargets::for_spec(&spec, self.norms.clone())?;
        let config = self.config.apply(DecisionConfig::default());
        config.validate()?;
        Ok((spec, targets, config))
    }
}

/// Failure of a command, carrying its exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Invalid(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Io(_) => EXIT_INVALID,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Numerical(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument { .. } => CliError::Invalid(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "multimonotone", version, about = "Admissible derivative norms of multiply monotone functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide one problem and print the verdict.
    Check(CheckArgs),
    /// Vary one norm over a grid and print one CSV row per value.
    Scan(ScanArgs),
    /// Run the randomized oracle and invariant suites.
    Selftest(SelftestArgs),
    /// Evaluate a spline document.
    Eval(EvalArgs),
}

/// A problem from a document, inline flags, or a document with flags overriding it.
#[derive(Debug, Args)]
struct ProblemArgs {
    /// Problem document with fields r, orders, norms and optional config.
    problem: Option<PathBuf>,
    #[arg(long)]
    r: Option<u32>,
    /// Comma-separated derivative orders.
    #[arg(long, value_delimiter = ',')]
    orders: Option<Vec<u32>>,
    /// Comma-separated norm targets, aligned with the orders.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    norms: Option<Vec<f64>>,
    /// Relative tolerance for equality at stage boundaries.
    #[arg(long)]
    tolerance: Option<f64>,
}

impl ProblemArgs {
    fn resolve(&self) -> Result<ProblemDocument, CliError> {
        let mut doc = match &self.problem {
            Some(path) => ProblemDocument::parse(&read(path)?)?,
            None => ProblemDocument {
                r: self.r.ok_or_else(|| missing("r"))?,
                orders: self.orders.clone().ok_or_else(|| missing("orders"))?,
                norms: self.norms.clone().ok_or_else(|| missing("norms"))?,
                config: ConfigOverrides::default(),
            },
        };
        if let Some(r) = self.r {
            doc.r = r;
        }
        if let Some(orders) = &self.orders {
            doc.orders = orders.clone();
        }
        if let Some(norms) = &self.norms {
            doc.norms = norms.clone();
        }
        if self.tolerance.is_some() {
            doc.config.tolerance = self.tolerance;
        }
        Ok(doc)
    }
}

fn missing(field: &str) -> CliError {
    CliError::Invalid(format!("missing --{field} (or a problem document)"))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Debug, Args)]
struct CheckArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Print the verdict as a JSON document at 17 significant digits.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct ScanArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Index into the orders of the norm to vary; its value in the problem is ignored.
    #[arg(long)]
    vary: usize,
    /// Grid `lo:hi:steps` with `0 < lo < hi` and at least 2 steps.
    #[arg(long)]
    range: String,
}

#[derive(Debug, Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Spline document with fields r, l, knots and constant.
    #[arg(long)]
    spline: PathBuf,
    /// Comma-separated evaluation points, all at most 0.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    at: Vec<f64>,
    /// Derivative order of the values at `--at`.
    #[arg(long, default_value_t = 0)]
    order: u32,
    /// Print the uniform norms of every derivative.
    #[arg(long)]
    norms: bool,
    #[arg(long)]
    json: bool,
}

/// Parses the arguments (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes on stdout.
            return if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                EXIT_INVALID
            } else {
                let _ = write!(out, "{}", e.render());
                EXIT_OK
            };
        }
    };
    let result = match &cli.command {
        Command::Check(args) => check(args, out),
        Command::Scan(args) => scan(args, out),
        Command::Selftest(args) => selftest(args, out),
        Command::Eval(args) => eval(args, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn check(args: &CheckArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let doc = args.problem.resolve()?;
    let (spec, targets, config) = doc.validate()?;
    let verdict = decide(&spec, &targets, &config)?;
    if args.json {
        writeln!(out, "{}", to_structured(&verdict)?)?;
    } else {
        writeln!(out, "{}", describe(&verdict, &spec, targets.values()))?;
    }
    Ok(if verdict.admissible { EXIT_OK } else { EXIT_INADMISSIBLE })
}

/// One-line human summary of a verdict at six significant digits.
pub fn describe(verdict: &Verdict, spec: &OrderSpec, norms: &[f64]) -> String {
    let mut line = match (&verdict.witness, verdict.admissible) {
        (Some(w), true) => {
            let mut s = format!("admissible, {}, knots {}", verdict.spline_type.label(), human_list(w.knots()));
            if w.constant() > 0.0 {
                s.push_str(&format!(", constant {}", human(w.constant())));
            }
            if !spec.ends_at_r() {
                s.push_str(&format!(", l {}", human(w.l())));
            }
            s
        }
        _ => {
            let stage = verdict.binding_stage;
            let order = spec.orders()[stage];
            // Orders below r need strict excess over the limit.
            let relation = if spec.ends_at_r() { "≥" } else { ">" };
            match verdict.margins.get(stage).copied().flatten() {
                Some(m) => format!("inadmissible at order {order}: need {relation} {}", human(norms[stage] - m)),
                None => format!("inadmissible at order {order}"),
            }
        }
    };
    if verdict.certainty == Certainty::BoundaryAtTolerance {
        line.push_str(" (boundary at tolerance)");
    }
    line
}

/// Parses `lo:hi:steps` into the grid values.
pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = |why: &str| CliError::Invalid(format!("invalid argument `range`: {text:?} {why}"));
    let parts: Vec<&str> = text.split(':').collect();
    let [lo, hi, steps] = parts.as_slice() else {
        return Err(bad("is not of the form lo:hi:steps"));
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad("has a non-numeric lower end"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad("has a non-numeric upper end"))?;
    let steps: usize = steps.trim().parse().map_err(|_| bad("has a non-integer step count"))?;
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi) {
        return Err(bad("needs 0 < lo < hi"));
    }
    if steps < 2 {
        return Err(bad("needs at least 2 steps"));
    }
    let span = hi - lo;
    Ok((0..steps)
        .map(|i| if i + 1 == steps { hi } else { lo + span * i as f64 / (steps - 1) as f64 })
        .collect())
}

fn type_code(t: SplineType) -> &'static str {
    match t {
        SplineType::Type1 => "1",
        SplineType::Type2 => "2",
        SplineType::Type3 => "3",
        SplineType::Extended => "extended",
        SplineType::None => "none",
    }
}

fn scan(args: &ScanArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let doc = args.problem.resolve()?;
    let (spec, targets, config) = doc.validate()?;
    if args.vary >= spec.d() {
        return Err(CliError::Invalid(format!(
            "invalid argument `vary`: index {} but only {} orders",
            args.vary,
            spec.d()
        )));
    }
    let values = parse_range(&args.range)?;
    // Rows are independent; collecting keeps them in grid order.
    let rows: Vec<(String, bool)> = values
        .par_iter()
        .map(|&value| {
            let mut norms = targets.values().to_vec();
            norms[args.vary] = value;
            let verdict = NormTargets::for_spec(&spec, norms).and_then(|t| decide(&spec, &t, &config));
            match verdict {
                Ok(v) => {
                    let margin = v.margins[args.vary].map(|m| m.to_string()).unwrap_or_default();
                    (format!("{value},{},{},{margin}", v.admissible, type_code(v.spline_type)), true)
                }
                Err(_) => (format!("{value},error,,"), false),
            }
        })
        .collect();
    writeln!(out, "{SCAN_HEADER}")?;
    for (row, _) in &rows {
        writeln!(out, "{row}")?;
    }
    Ok(if rows.iter().all(|r| r.1) { EXIT_OK } else { EXIT_NUMERICAL })
}

/// Combined outcome of the self-test suites.
#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub comparison: SuiteReport,
    pub round_trip: InvariantReport,
    pub vandermonde: InvariantReport,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.comparison.passed() && self.round_trip.passed() && self.vandermonde.passed()
    }
}

/// Determinant samples per oracle trial; each is far cheaper than a decision.
const VANDERMONDE_PER_TRIAL: usize = 10;

fn selftest(args: &SelftestArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let comparison = comparison_suite(args.trials, SuiteDims::default(), args.seed, &DecisionConfig::default())?;
    let report = SelftestReport {
        comparison,
        round_trip: round_trip_suite(args.trials, args.seed),
        vandermonde: vandermonde_suite(VANDERMONDE_PER_TRIAL * args.trials, args.seed),
    };
    if args.json {
        writeln!(out, "{}", to_structured(&report)?)?;
    } else {
        write_selftest(&report, out)?;
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_INADMISSIBLE })
}

fn write_selftest(report: &SelftestReport, out: &mut dyn Write) -> io::Result<()> {
    let c = &report.comparison;
    let t = &c.type_counts;
    writeln!(out, "oracle suite: {} trials, seed {}, {} failures", c.trials, c.seed, c.failures.len())?;
    writeln!(
        out,
        "  admissible {}/{}; types 1: {}, 2: {}, 3: {}, extended: {}",
        c.admissible, c.trials, t.type1, t.type2, t.type3, t.extended
    )?;
    writeln!(
        out,
        "  extremal checks {}/{}, flips {}/{}",
        c.extremal_passed, c.extremal_checks, c.flip_passed, c.flip_trials
    )?;
    writeln!(
        out,
        "  worst witness residual {}, worst grid residual {}",
        human(c.worst_witness_residual),
        human(c.worst_grid_residual)
    )?;
    for f in &c.failures {
        writeln!(
            out,
            "  FAIL trial {} seed {} orders {:?} norms {}: {}: {}",
            f.trial,
            f.seed,
            f.orders,
            human_list(&f.norms),
            f.stage,
            f.message
        )?;
    }
    let rt = &report.round_trip;
    writeln!(
        out,
        "round trips: {} trials, {} failures, worst knot error {}",
        rt.trials,
        rt.failures.len(),
        human(rt.worst)
    )?;
    let vd = &report.vandermonde;
    writeln!(out, "vandermonde: {} determinants, {} not positive", vd.trials, vd.failures.len())?;
    for (seed, message) in rt.failures.iter().chain(&vd.failures) {
        writeln!(out, "  FAIL seed {seed}: {message}")?;
    }
    writeln!(out, "{}", if report.passed() { "PASS" } else { "FAIL" })
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    #[serde(skip_serializing_if = "Vec::is_empty")]
    values: Vec<EvalPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    norms: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct EvalPoint {
    t: f64,
    order: u32,
    value: f64,
}

fn eval(args: &EvalArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    if args.at.is_empty() && !args.norms {
        return Err(CliError::Invalid("eval needs --at or --norms".into()));
    }
    let spline: AlternatingSpline = serde_json::from_str(&read(&args.spline)?)
        .map_err(|e| CliError::Invalid(format!("spline document: {e}")))?;
    let values = args
        .at
        .iter()
        .map(|&t| {
            Ok(EvalPoint {
                t,
                order: args.order,
                value: spline.eval_derivative(args.order, t)?,
            })
        })
        .collect::<crate::Result<Vec<_>>>()?;
    let norms = args.norms.then(|| (0..=spline.r()).map(|k| spline.norm(k)).collect::<Vec<_>>());
    let output = EvalOutput { values, norms };
    if args.json {
        writeln!(out, "{}", to_structured(&output)?)?;
        return Ok(EXIT_OK);
    }
    for p in &output.values {
        writeln!(out, "x^({})({}) = {}", p.order, human(p.t), human(p.value))?;
    }
    if let Some(norms) = &output.norms {
        for (k, n) in norms.iter().enumerate() {
            writeln!(out, "|x^({k})| = {}", human(*n))?;
        }
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_grid() {
        assert_eq!(parse_range("0.3:0.7:5").unwrap().len(), 5);
        assert_eq!(parse_range("1:2:2").unwrap(), vec![1.0, 2.0]);
        let grid = parse_range("0.3:0.7:5").unwrap();
        assert_eq!(grid[4], 0.7);
        for bad in ["1:2", "2:1:5", "0:1:5", "1:2:1", "a:2:3", "1:2:x"] {
            assert!(matches!(parse_range(bad), Err(CliError::Invalid(m)) if m.contains("range")), "{bad}");
        }
    }

    #[test]
    fn problem_document_fields() {
        let doc = ProblemDocument::parse(r#"{"r": 2, "orders": [0, 1, 2], "norms": [0.7, 1, 1], "config": {"tolerance": 1e-8}}"#)
            .unwrap();
        let (_, _, config) = doc.validate().unwrap();
        assert_eq!(config.equality_tolerance, 1e-8);
        let err = ProblemDocument::parse(r#"{"r": 2, "orders": [0, 1, 2], "norm": [1]}"#).unwrap_err();
        assert!(err.to_string().contains("norm"));
        let doc = ProblemDocument::parse(r#"{"r": 2, "orders": [2, 1], "norms": [1, 1]}"#).unwrap();
        assert!(doc.validate().unwrap_err().to_string().contains("orders"));
    }

    #[test]
    fn describes_verdicts() {
        let spec = OrderSpec::new(2, vec![0, 1, 2]).unwrap();
        let config = DecisionConfig::default();
        let line = |norms: Vec<f64>| {
            let t = NormTargets::for_spec(&spec, norms.clone()).unwrap();
            describe(&decide(&spec, &t, &config).unwrap(), &spec, &norms)
        };
        assert_eq!(line(vec![0.7, 1.0, 1.0]), "admissible, Type 1, knots [1.2, 0.2]");
        assert_eq!(line(vec![0.3, 1.0, 1.0]), "inadmissible at order 0: need ≥ 0.5");
        assert_eq!(line(vec![0.5, 1.0, 1.0]), "admissible, Type 2, knots [1] (boundary at tolerance)");
    }
}
