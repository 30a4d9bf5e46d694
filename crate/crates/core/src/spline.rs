//! Truncated-power splines on the negative half-line.
//!
//! Two representations are provided. [`AlternatingSpline`] is the extremal
//! family `C + (l/r!) * sum_j (-1)^(j+1) (t + a_j)_+^r` with ordered knots
//! `a_1 > ... > a_s > 0`. [`MonotoneSpline`] is a general nonnegative
//! combination `C + sum_j c_j (t + b_j)_+^r / r!` whose coefficient prefix
//! sums are nonnegative; it stands in for an arbitrary r-monotone function.
//!
//! Every derivative of order below `r` of such a function is nonnegative and
//! nondecreasing on the half-line, so its uniform norm is its value at zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{alternating_power_sum, factorial, knot_gaps, MAX_ORDER};

/// Default number of grid points used by [`validate_r_monotone`].
pub const DEFAULT_GRID_SIZE: usize = 10_001;

/// Highest derivative order `r` together with the strictly increasing
/// derivative orders `k_1 < ... < k_d` whose norms are prescribed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderSpec {
    r: u32,
    orders: Vec<u32>,
}

impl OrderSpec {
    pub fn new(r: u32, orders: Vec<u32>) -> Result<Self> {
        check_order(r)?;
        if orders.len() < 2 {
            return Err(Error::invalid("orders", "at least two derivative orders are required"));
        }
        validate_orders(r, &orders)?;
        Ok(Self { r, orders })
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn d(&self) -> usize {
        self.orders.len()
    }

    /// True when the highest prescribed order is `r` itself.
    pub fn ends_at_r(&self) -> bool {
        *self.orders.last().expect("d >= 2") == self.r
    }
}

pub(crate) fn check_order(r: u32) -> Result<()> {
    if r == 0 {
        return Err(Error::invalid("r", "order must be positive"));
    }
    if r > MAX_ORDER {
        return Err(Error::invalid("r", format!("order {r} exceeds the supported maximum {MAX_ORDER}")));
    }
    Ok(())
}

pub(crate) fn validate_orders(r: u32, orders: &[u32]) -> Result<()> {
    for w in orders.windows(2) {
        if w[0] >= w[1] {
            return Err(Error::invalid("orders", "orders must be strictly increasing"));
        }
    }
    if let Some(&last) = orders.last() {
        if last > r {
            return Err(Error::invalid("orders", format!("order {last} exceeds r = {r}")));
        }
    }
    Ok(())
}

/// Positive norm targets aligned with an [`OrderSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormTargets {
    values: Vec<f64>,
}

impl NormTargets {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        check_positive("norms", &values)?;
        Ok(Self { values })
    }

    /// Targets checked against the length of `spec`.
    pub fn for_spec(spec: &OrderSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.d() {
            return Err(Error::invalid(
                "norms",
                format!("expected {} values, got {}", spec.d(), values.len()),
            ));
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub(crate) fn check_positive(field: &'static str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid(field, "no values given"));
    }
    for &v in values {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(field, format!("value {v} is not a positive finite number")));
        }
    }
    Ok(())
}

fn check_magnitude(l: f64) -> Result<()> {
    if !(l.is_finite() && l > 0.0) {
        return Err(Error::invalid("l", format!("{l} is not a positive finite number")));
    }
    Ok(())
}

fn check_constant(constant: f64) -> Result<()> {
    if !(constant.is_finite() && constant >= 0.0) {
        return Err(Error::invalid("constant", format!("{constant} is not a nonnegative finite number")));
    }
    Ok(())
}

fn check_gaps(gaps: &[f64]) -> Result<()> {
    for &g in gaps {
        if !(g.is_finite() && g > 0.0) {
            return Err(Error::invalid("gaps", format!("gap {g} is not a positive finite number")));
        }
    }
    Ok(())
}

pub(crate) fn check_knots(field: &'static str, knots: &[f64]) -> Result<()> {
    for &a in knots {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::invalid(field, format!("knot {a} is not a positive finite number")));
        }
    }
    for w in knots.windows(2) {
        if w[0] <= w[1] {
            return Err(Error::invalid(field, "knots must be strictly decreasing"));
        }
    }
    Ok(())
}

/// Amplitude and argument dilation `x -> alpha * x(lambda * t)`.
///
/// The k-th derivative norm picks up the factor `alpha * lambda^k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleTransform {
    alpha: f64,
    lambda: f64,
}

impl ScaleTransform {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid("alpha", "must be a positive finite number"));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid("lambda", "must be a positive finite number"));
        }
        Ok(Self { alpha, lambda })
    }

    pub fn identity() -> Self {
        Self { alpha: 1.0, lambda: 1.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Factor applied to the k-th derivative norm.
    pub fn norm_factor(&self, k: u32) -> f64 {
        self.alpha * self.lambda.powi(k as i32)
    }

    pub fn inverse(&self) -> Self {
        Self {
            alpha: 1.0 / self.alpha,
            lambda: 1.0 / self.lambda,
        }
    }
}

/// Common evaluation surface of both spline representations.
pub trait TruncatedPower {
    fn order(&self) -> u32;

    /// k-th derivative at `t <= 0`. At a knot the r-th derivative takes its right limit.
    fn eval_derivative(&self, k: u32, t: f64) -> Result<f64>;

    /// Largest knot magnitude, zero for a constant.
    fn largest_knot(&self) -> f64;

    /// Points `-b_j` where the r-th derivative jumps, left to right.
    fn breakpoints(&self) -> Vec<f64>;

    /// A magnitude used to turn absolute sampling tolerances into relative ones.
    fn magnitude_scale(&self, k: u32) -> f64;
}

fn check_eval_args(r: u32, k: u32, t: f64) -> Result<()> {
    if k > r {
        return Err(Error::invalid("k", format!("derivative order {k} exceeds r = {r}")));
    }
    if t.is_nan() || t > 0.0 {
        return Err(Error::invalid("t", format!("evaluation point {t} is not on the negative half-line")));
    }
    Ok(())
}

/// `C + (l/r!) * sum_j (-1)^(j+1) (t + a_j)_+^r` with `a_1 > ... > a_s > 0`.
///
/// A knot-free value is allowed and denotes the constant `C`; it is never a
/// member of the spline families `Phi_{r,n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineDocument", into = "SplineDocument")]
pub struct AlternatingSpline {
    r: u32,
    l: f64,
    knots: Vec<f64>,
    /// `gaps[j] = a_j - a_{j+1}`, exact even when the rounded knots nearly coincide.
    gaps: Vec<f64>,
    constant: f64,
}

/// Serialized form of an [`AlternatingSpline`].
///
/// `gaps` is written only when the knot differences lose information, as for
/// a close pair of large knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineDocument {
    pub r: u32,
    pub l: f64,
    pub knots: Vec<f64>,
    #[serde(default)]
    pub constant: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaps: Option<Vec<f64>>,
}

impl TryFrom<SplineDocument> for AlternatingSpline {
    type Error = Error;

    fn try_from(doc: SplineDocument) -> Result<Self> {
        match doc.gaps {
            None => AlternatingSpline::with_constant(doc.r, doc.l, doc.knots, doc.constant),
            Some(gaps) => AlternatingSpline::with_knots_and_gaps(doc.r, doc.l, doc.knots, gaps, doc.constant),
        }
    }
}

impl From<AlternatingSpline> for SplineDocument {
    fn from(s: AlternatingSpline) -> Self {
        let gaps = (knot_gaps(&s.knots) != s.gaps).then_some(s.gaps);
        SplineDocument {
            r: s.r,
            l: s.l,
            knots: s.knots,
            constant: s.constant,
            gaps,
        }
    }
}

impl AlternatingSpline {
    pub fn new(r: u32, l: f64, knots: Vec<f64>) -> Result<Self> {
        Self::with_constant(r, l, knots, 0.0)
    }

    pub fn with_constant(r: u32, l: f64, knots: Vec<f64>, constant: f64) -> Result<Self> {
        check_order(r)?;
        check_magnitude(l)?;
        check_knots("knots", &knots)?;
        check_constant(constant)?;
        let gaps = knot_gaps(&knots);
        Ok(Self {
            r,
            l,
            knots,
            gaps,
            constant,
        })
    }

    /// Spline given by its smallest knot and the positive gaps above it,
    /// `gaps[j] = a_j - a_{j+1}`. The gaps are kept exactly; the knots are their
    /// rounded partial sums and may coincide in floating point.
    pub fn from_gaps(r: u32, l: f64, smallest: f64, gaps: Vec<f64>, constant: f64) -> Result<Self> {
        check_order(r)?;
        check_magnitude(l)?;
        check_knots("smallest", &[smallest])?;
        check_gaps(&gaps)?;
        check_constant(constant)?;
        let mut knots = vec![smallest; gaps.len() + 1];
        for j in (0..gaps.len()).rev() {
            knots[j] = knots[j + 1] + gaps[j];
        }
        if !knots[0].is_finite() {
            return Err(Error::invalid("gaps", "knots overflow"));
        }
        Ok(Self {
            r,
            l,
            knots,
            gaps,
            constant,
        })
    }

    /// Spline with explicit knots and gaps that must agree up to rounding.
    pub fn with_knots_and_gaps(r: u32, l: f64, knots: Vec<f64>, gaps: Vec<f64>, constant: f64) -> Result<Self> {
        check_order(r)?;
        check_magnitude(l)?;
        check_constant(constant)?;
        for &a in &knots {
            if !(a.is_finite() && a > 0.0) {
                return Err(Error::invalid("knots", format!("knot {a} is not a positive finite number")));
            }
        }
        if gaps.len() + 1 != knots.len().max(1) {
            return Err(Error::invalid("gaps", format!("{} gaps for {} knots", gaps.len(), knots.len())));
        }
        check_gaps(&gaps)?;
        for (j, w) in knots.windows(2).enumerate() {
            if (w[0] - w[1] - gaps[j]).abs() > 8.0 * f64::EPSILON * w[0] {
                return Err(Error::invalid("gaps", format!("gap {j} disagrees with the knots")));
            }
        }
        Ok(Self {
            r,
            l,
            knots,
            gaps,
            constant,
        })
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn l(&self) -> f64 {
        self.l
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Differences of consecutive knots, kept to full relative precision.
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    pub fn knot_count(&self) -> usize {
        self.knots.len()
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// The same spline with its additive constant replaced.
    pub fn with_offset(&self, constant: f64) -> Result<Self> {
        check_constant(constant)?;
        Ok(Self {
            constant,
            ..self.clone()
        })
    }

    /// The same knots with magnitude `l`.
    pub fn with_magnitude(&self, l: f64) -> Result<Self> {
        check_magnitude(l)?;
        Ok(Self { l, ..self.clone() })
    }

    /// Uniform norm of the k-th derivative, `k <= r`.
    pub fn norm(&self, k: u32) -> f64 {
        assert!(k <= self.r, "derivative order {k} exceeds r = {}", self.r);
        if k == self.r {
            return if self.knots.is_empty() { 0.0 } else { self.l };
        }
        let p = self.r - k;
        let spline_part = self.l / factorial(p) * alternating_power_sum(&self.knots, &self.gaps, p);
        if k == 0 {
            spline_part + self.constant
        } else {
            spline_part
        }
    }

    /// Norms at each listed order.
    pub fn norms_at(&self, orders: &[u32]) -> Result<Vec<f64>> {
        validate_orders(self.r, orders)?;
        Ok(orders.iter().map(|&k| self.norm(k)).collect())
    }

    /// Closed-form norms at the orders of `spec`.
    pub fn closed_form_norms(&self, spec: &OrderSpec) -> Result<Vec<f64>> {
        if spec.r() != self.r {
            return Err(Error::invalid("orders", format!("spec has r = {}, spline has r = {}", spec.r(), self.r)));
        }
        self.norms_at(spec.orders())
    }

    pub fn rescale(&self, transform: &ScaleTransform) -> Self {
        Self {
            r: self.r,
            l: self.l * transform.alpha * transform.lambda.powi(self.r as i32),
            knots: self.knots.iter().map(|a| a / transform.lambda).collect(),
            gaps: self.gaps.iter().map(|g| g / transform.lambda).collect(),
            constant: self.constant * transform.alpha,
        }
    }

    /// The same function as a general nonnegative combination.
    pub fn to_monotone(&self) -> MonotoneSpline {
        let terms = self
            .knots
            .iter()
            .enumerate()
            .map(|(j, &a)| (a, if j % 2 == 0 { self.l } else { -self.l }))
            .collect();
        MonotoneSpline {
            r: self.r,
            terms,
            constant: self.constant,
        }
    }
}

impl TruncatedPower for AlternatingSpline {
    fn order(&self) -> u32 {
        self.r
    }

    fn eval_derivative(&self, k: u32, t: f64) -> Result<f64> {
        check_eval_args(self.r, k, t)?;
        let offset = if k == 0 { self.constant } else { 0.0 };
        if k == self.r {
            let active = self.knots.iter().filter(|&&a| t + a >= 0.0).count();
            return Ok(offset + if active % 2 == 1 { self.l } else { 0.0 });
        }
        let p = self.r - k;
        let shifted: Vec<f64> = self.knots.iter().map(|&a| (t + a).max(0.0)).collect();
        Ok(offset + self.l / factorial(p) * alternating_power_sum(&shifted, &self.gaps, p))
    }

    fn largest_knot(&self) -> f64 {
        self.knots.first().copied().unwrap_or(0.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.knots.iter().map(|a| -a).collect()
    }

    fn magnitude_scale(&self, k: u32) -> f64 {
        if k == self.r {
            return self.l;
        }
        let p = self.r - k;
        let raw: f64 = self.knots.iter().map(|a| a.powi(p as i32)).sum::<f64>() * self.l / factorial(p);
        raw + if k == 0 { self.constant } else { 0.0 }
    }
}

/// `C + sum_j c_j (t + b_j)_+^r / r!` with `b_1 > ... > b_m > 0`.
///
/// The function is r-monotone exactly when every prefix sum of the
/// coefficients is nonnegative; construction does not enforce this so that
/// invalid candidates can be diagnosed with [`validate_r_monotone`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneSpline {
    r: u32,
    terms: Vec<(f64, f64)>,
    constant: f64,
}

impl MonotoneSpline {
    pub fn new(r: u32, terms: Vec<(f64, f64)>, constant: f64) -> Result<Self> {
        check_order(r)?;
        let knots: Vec<f64> = terms.iter().map(|t| t.0).collect();
        check_knots("terms", &knots)?;
        if terms.iter().any(|t| !t.1.is_finite()) {
            return Err(Error::invalid("terms", "coefficients must be finite"));
        }
        if !(constant.is_finite() && constant >= 0.0) {
            return Err(Error::invalid("constant", format!("{constant} is not a nonnegative finite number")));
        }
        Ok(Self { r, terms, constant })
    }

    pub fn constant_function(r: u32, constant: f64) -> Result<Self> {
        Self::new(r, Vec::new(), constant)
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Running sums `c_1 + ... + c_j`, i.e. the values of the r-th derivative.
    pub fn prefix_sums(&self) -> Vec<f64> {
        self.terms
            .iter()
            .scan(0.0, |acc, &(_, c)| {
                *acc += c;
                Some(*acc)
            })
            .collect()
    }

    /// Exact membership test: all prefix sums nonnegative.
    pub fn is_r_monotone(&self) -> bool {
        self.prefix_sums().iter().all(|&p| p >= 0.0)
    }

    /// Uniform norms at the listed orders.
    ///
    /// Below order r this is the value at zero; at order r it is the largest
    /// prefix sum of the coefficients.
    pub fn measure_norms_at(&self, orders: &[u32]) -> Result<Vec<f64>> {
        validate_orders(self.r, orders)?;
        Ok(orders.iter().map(|&k| self.measured_norm(k)).collect())
    }

    pub fn measure_norms(&self, spec: &OrderSpec) -> Result<Vec<f64>> {
        if spec.r() != self.r {
            return Err(Error::invalid("orders", format!("spec has r = {}, function has r = {}", spec.r(), self.r)));
        }
        self.measure_norms_at(spec.orders())
    }

    fn measured_norm(&self, k: u32) -> f64 {
        if k == self.r {
            return self.prefix_sums().iter().fold(0.0_f64, |m, p| m.max(p.abs()));
        }
        let p = self.r - k;
        let sum: f64 = self.terms.iter().map(|&(b, c)| c * b.powi(p as i32)).sum::<f64>() / factorial(p);
        sum + if k == 0 { self.constant } else { 0.0 }
    }

    pub fn rescale(&self, transform: &ScaleTransform) -> Self {
        let coef_factor = transform.alpha * transform.lambda.powi(self.r as i32);
        Self {
            r: self.r,
            terms: self
                .terms
                .iter()
                .map(|&(b, c)| (b / transform.lambda, c * coef_factor))
                .collect(),
            constant: self.constant * transform.alpha,
        }
    }
}

impl TruncatedPower for MonotoneSpline {
    fn order(&self) -> u32 {
        self.r
    }

    fn eval_derivative(&self, k: u32, t: f64) -> Result<f64> {
        check_eval_args(self.r, k, t)?;
        let offset = if k == 0 { self.constant } else { 0.0 };
        if k == self.r {
            let s: f64 = self.terms.iter().filter(|&&(b, _)| t + b >= 0.0).map(|&(_, c)| c).sum();
            return Ok(offset + s);
        }
        let p = self.r - k;
        let s: f64 = self
            .terms
            .iter()
            .map(|&(b, c)| c * (t + b).max(0.0).powi(p as i32))
            .sum::<f64>()
            / factorial(p);
        Ok(offset + s)
    }

    fn largest_knot(&self) -> f64 {
        self.terms.first().map(|t| t.0).unwrap_or(0.0)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.terms.iter().map(|t| -t.0).collect()
    }

    fn magnitude_scale(&self, k: u32) -> f64 {
        let offset = if k == 0 { self.constant } else { 0.0 };
        if k == self.r {
            return offset + self.terms.iter().map(|t| t.1.abs()).sum::<f64>();
        }
        let p = self.r - k;
        offset + self.terms.iter().map(|&(b, c)| c.abs() * b.powi(p as i32)).sum::<f64>() / factorial(p)
    }
}

/// Outcome of sampling all derivatives on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MonotonicityDiagnostic {
    Ok,
    /// First sample found below `-tolerance`, scanning from order r downwards.
    Violation { order: u32, t: f64, value: f64 },
}

impl MonotonicityDiagnostic {
    pub fn is_ok(&self) -> bool {
        matches!(self, MonotonicityDiagnostic::Ok)
    }
}

/// Samples derivatives `r, r-1, ..., 0` on a uniform grid over
/// `[-(largest knot) - 1, 0]` and reports the first negative value.
pub fn validate_r_monotone<S: TruncatedPower + ?Sized>(x: &S, grid_size: usize) -> Result<MonotonicityDiagnostic> {
    if grid_size < 2 {
        return Err(Error::invalid("grid_size", "at least two grid points are required"));
    }
    let r = x.order();
    let left = -x.largest_knot() - 1.0;
    let step = -left / (grid_size - 1) as f64;
    for k in (0..=r).rev() {
        let tolerance = 1e-12 * x.magnitude_scale(k).max(f64::MIN_POSITIVE);
        for i in 0..grid_size {
            let t = if i + 1 == grid_size { 0.0 } else { left + step * i as f64 };
            let value = x.eval_derivative(k, t)?;
            if value < -tolerance {
                return Ok(MonotonicityDiagnostic::Violation { order: k, t, value });
            }
        }
    }
    Ok(MonotonicityDiagnostic::Ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spline(r: u32, l: f64, knots: &[f64], c: f64) -> AlternatingSpline {
        AlternatingSpline::with_constant(r, l, knots.to_vec(), c).unwrap()
    }

    #[test]
    fn eval_examples() {
        let s = spline(2, 1.0, &[1.0], 0.0);
        assert_relative_eq!(s.eval_derivative(0, -0.5).unwrap(), 0.125);
        assert_eq!(s.eval_derivative(0, -2.0).unwrap(), 0.0);
        let s3 = spline(3, 1.0, &[2.0, 1.0], 0.0);
        assert_relative_eq!(s3.eval_derivative(1, 0.0).unwrap(), 1.5);
    }

    #[test]
    fn eval_rejects_bad_arguments() {
        let s = spline(2, 1.0, &[1.0], 0.0);
        assert!(matches!(s.eval_derivative(3, -1.0), Err(Error::InvalidArgument { field: "k", .. })));
        assert!(matches!(s.eval_derivative(0, 0.5), Err(Error::InvalidArgument { field: "t", .. })));
    }

    #[test]
    fn top_derivative_is_right_continuous() {
        let s = spline(2, 3.0, &[2.0, 1.0], 0.0);
        assert_eq!(s.eval_derivative(2, -2.0).unwrap(), 3.0);
        assert_eq!(s.eval_derivative(2, -2.0 - 1e-12).unwrap(), 0.0);
        assert_eq!(s.eval_derivative(2, -1.0).unwrap(), 0.0);
        assert_eq!(s.eval_derivative(2, -1.5).unwrap(), 3.0);
    }

    #[test]
    fn closed_form_examples() {
        let s = spline(2, 1.0, &[1.0], 0.0);
        assert_eq!(s.norms_at(&[0, 1, 2]).unwrap(), vec![0.5, 1.0, 1.0]);
        let s3 = spline(3, 1.0, &[2.0, 1.0], 0.0);
        let n = s3.norms_at(&[0, 1, 2, 3]).unwrap();
        for (got, want) in n.iter().zip([7.0 / 6.0, 1.5, 1.0, 1.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        let sc = spline(3, 1.0, &[1.0], 2.0);
        let n = sc.norms_at(&[0, 3]).unwrap();
        assert_relative_eq!(n[0], 2.0 + 1.0 / 6.0, max_relative = 1e-15);
        assert_eq!(n[1], 1.0);
    }

    #[test]
    fn measure_examples() {
        let x = MonotoneSpline::new(3, vec![(2.0, 1.0), (1.0, 1.0)], 0.0).unwrap();
        let n = x.measure_norms_at(&[0, 1, 2, 3]).unwrap();
        for (got, want) in n.iter().zip([1.5, 2.5, 3.0, 2.0]) {
            assert_relative_eq!(*got, want, max_relative = 1e-15);
        }
        let c = MonotoneSpline::constant_function(2, 5.0).unwrap();
        assert_eq!(c.measure_norms_at(&[0, 2]).unwrap(), vec![5.0, 0.0]);
    }

    #[test]
    fn rescale_examples() {
        let s = spline(2, 1.0, &[1.0], 0.0);
        assert_eq!(s.rescale(&ScaleTransform::identity()), s);
        let doubled = s.rescale(&ScaleTransform::new(2.0, 1.0).unwrap());
        assert_eq!(doubled.l(), 2.0);
        assert_eq!(doubled.norms_at(&[0, 1, 2]).unwrap(), vec![1.0, 2.0, 2.0]);
        // (r=2, knot 2, l=1): norm_1 = 2; dilation by 2 gives knot 1, l = 4, norm_1 = 4.
        let wide = spline(2, 1.0, &[2.0], 0.0);
        let narrowed = wide.rescale(&ScaleTransform::new(1.0, 2.0).unwrap());
        assert_eq!(narrowed.knots(), &[1.0]);
        assert_eq!(narrowed.l(), 4.0);
        assert_relative_eq!(wide.norm(1), 2.0);
        assert_relative_eq!(narrowed.norm(1), 4.0);
    }

    #[test]
    fn validation_examples() {
        let s = spline(4, 2.0, &[3.0, 2.5, 0.7, 0.1], 0.0);
        assert!(validate_r_monotone(&s, 2001).unwrap().is_ok());
        let bad = MonotoneSpline::new(2, vec![(2.0, 1.0), (1.0, -2.0)], 0.0).unwrap();
        match validate_r_monotone(&bad, 2001).unwrap() {
            MonotonicityDiagnostic::Violation { order, .. } => assert_eq!(order, 2),
            other => panic!("expected violation, got {other:?}"),
        }
        let good = MonotoneSpline::new(2, vec![(2.0, 2.0), (1.0, -1.0)], 0.0).unwrap();
        assert!(validate_r_monotone(&good, 2001).unwrap().is_ok());
        assert!(validate_r_monotone(&good, 1).is_err());
    }

    #[test]
    fn constructors_enforce_invariants() {
        assert!(AlternatingSpline::new(2, 1.0, vec![1.0, 1.0]).is_err());
        assert!(AlternatingSpline::new(2, 1.0, vec![1.0, -1.0]).is_err());
        assert!(AlternatingSpline::new(2, 0.0, vec![1.0]).is_err());
        assert!(AlternatingSpline::with_constant(2, 1.0, vec![1.0], -1.0).is_err());
        assert!(AlternatingSpline::new(31, 1.0, vec![1.0]).is_err());
        assert!(OrderSpec::new(3, vec![2, 1]).is_err());
        assert!(OrderSpec::new(3, vec![1]).is_err());
        assert!(OrderSpec::new(3, vec![1, 4]).is_err());
        assert!(NormTargets::new(vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let s = spline(3, 0.1, &[1.0 / 3.0, 0.2], 0.7);
        let text = serde_json::to_string(&s).unwrap();
        let back: AlternatingSpline = serde_json::from_str(&text).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"r":2,"l":1.0,"knots":[0.5,1.0],"constant":0}"#;
        assert!(serde_json::from_str::<AlternatingSpline>(bad).is_err());
    }
}
