//! Generalized Vandermonde determinants `det[x_j^{alpha_i}]`.
//!
//! For strictly decreasing positive nodes and strictly decreasing exponents the
//! determinant is positive. Nearly coincident nodes or exponents make the
//! matrix nearly singular, so a double precision LU whose pivots are not
//! clearly positive is repeated in double-double arithmetic with entries
//! evaluated to about 32 digits.

use crate::error::{Error, Result};

/// Pivot magnitude (rows scaled to unit max) below which the f64 result is
/// not trusted.
const PIVOT_GUARD: f64 = 1e-6;

/// Determinant of the matrix with entries `x_j^{exponents_i}`.
pub fn vandermonde_det(x: &[f64], exponents: &[f64]) -> Result<f64> {
    let (sign, log_abs) = vandermonde_log_det(x, exponents)?;
    Ok(sign * log_abs.exp())
}

/// Sign and natural log of the absolute determinant.
pub fn vandermonde_log_det(x: &[f64], exponents: &[f64]) -> Result<(f64, f64)> {
    validate(x, exponents)?;
    if let Some(result) = lu_f64(x, exponents) {
        return Ok(result);
    }
    Ok(lu_dd(x, exponents))
}

fn validate(x: &[f64], exponents: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::invalid("x", "at least one node is required"));
    }
    if x.len() != exponents.len() {
        return Err(Error::invalid(
            "exponents",
            format!("{} nodes but {} exponents", x.len(), exponents.len()),
        ));
    }
    if x.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::invalid("x", "nodes must be positive and finite"));
    }
    if exponents.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("exponents", "exponents must be finite"));
    }
    if x.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::invalid("x", "nodes must be strictly decreasing"));
    }
    if exponents.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::invalid("exponents", "exponents must be strictly decreasing"));
    }
    Ok(())
}

/// Row-scaled partial-pivoting LU. `None` when a pivot is too small to trust.
fn lu_f64(x: &[f64], exponents: &[f64]) -> Option<(f64, f64)> {
    let n = x.len();
    let logs: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let mut log_scale = 0.0;
    let mut a = vec![0.0; n * n];
    for (i, &alpha) in exponents.iter().enumerate() {
        // Largest entry of a row sits at the largest (alpha >= 0) or smallest node.
        let top = logs.iter().map(|&y| alpha * y).fold(f64::NEG_INFINITY, f64::max);
        log_scale += top;
        for (j, &y) in logs.iter().enumerate() {
            a[i * n + j] = (alpha * y - top).exp();
        }
    }
    let mut sign = 1.0;
    let mut log_abs = log_scale;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&p, &q| a[p * n + col].abs().total_cmp(&a[q * n + col].abs()))
            .unwrap_or(col);
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            sign = -sign;
        }
        let pivot = a[col * n + col];
        if pivot.abs() < PIVOT_GUARD {
            return None;
        }
        if pivot < 0.0 {
            sign = -sign;
        }
        log_abs += pivot.abs().ln();
        for i in col + 1..n {
            let factor = a[i * n + col] / pivot;
            for j in col + 1..n {
                a[i * n + j] -= factor * a[col * n + j];
            }
        }
    }
    if sign > 0.0 {
        Some((sign, log_abs))
    } else {
        None
    }
}

fn lu_dd(x: &[f64], exponents: &[f64]) -> (f64, f64) {
    let n = x.len();
    let logs: Vec<Dd> = x.iter().map(|&v| Dd::ln(v)).collect();
    let mut log_scale = 0.0;
    let mut a = vec![Dd::ZERO; n * n];
    for (i, &alpha) in exponents.iter().enumerate() {
        let top = logs.iter().map(|y| alpha * y.hi).fold(f64::NEG_INFINITY, f64::max);
        log_scale += top;
        for (j, y) in logs.iter().enumerate() {
            a[i * n + j] = (y.mul_f64(alpha) - Dd::from(top)).exp();
        }
    }
    let mut sign = 1.0;
    let mut log_abs = log_scale;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&p, &q| a[p * n + col].hi.abs().total_cmp(&a[q * n + col].hi.abs()))
            .unwrap_or(col);
        if pivot_row != col {
            for j in 0..n {
                a.swap(col * n + j, pivot_row * n + j);
            }
            sign = -sign;
        }
        let pivot = a[col * n + col];
        if pivot.hi == 0.0 {
            return (0.0, f64::NEG_INFINITY);
        }
        if pivot.hi < 0.0 {
            sign = -sign;
        }
        log_abs += pivot.hi.abs().ln();
        for i in col + 1..n {
            let factor = a[i * n + col] / pivot;
            for j in col + 1..n {
                a[i * n + j] = a[i * n + j] - factor * a[col * n + j];
            }
        }
    }
    (sign, log_abs)
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Dd {
    hi: f64,
    lo: f64,
}

const LN2: Dd = Dd {
    hi: std::f64::consts::LN_2,
    lo: 2.319_046_813_846_299_6e-17,
};

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl From<f64> for Dd {
    fn from(hi: f64) -> Self {
        Dd { hi, lo: 0.0 }
    }
}

impl std::ops::Add for Dd {
    type Output = Dd;
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl std::ops::Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl std::ops::Sub for Dd {
    type Output = Dd;
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl std::ops::Mul for Dd {
    type Output = Dd;
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi));
        Dd { hi, lo }
    }
}

impl std::ops::Div for Dd {
    type Output = Dd;
    fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self - o.mul_f64(q1);
        let q2 = r.hi / o.hi;
        let r = r - o.mul_f64(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from(q3)
    }
}

impl Dd {
    const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    fn ldexp(self, k: i32) -> Dd {
        let f = 2f64.powi(k);
        Dd {
            hi: self.hi * f,
            lo: self.lo * f,
        }
    }

    fn exp(self) -> Dd {
        let k = (self.hi / LN2.hi).round();
        // |r| <= ln2/2, then r / 2^10 keeps the series short.
        let r = (self - LN2.mul_f64(k)).ldexp(-10);
        let mut term = Dd::from(1.0);
        let mut sum = Dd::from(1.0);
        for n in 1..=14 {
            term = (term * r).div_f64(n as f64);
            sum = sum + term;
        }
        for _ in 0..10 {
            sum = sum * sum;
        }
        sum.ldexp(k as i32)
    }

    fn div_f64(self, b: f64) -> Dd {
        let q1 = self.hi / b;
        let (p, e) = two_prod(q1, b);
        let (s, f) = two_sum(self.hi, -p);
        let q2 = (s + (f - e + self.lo)) / b;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo }
    }

    fn ln(x: f64) -> Dd {
        // Newton on exp: y <- y + x exp(-y) - 1.
        let mut y = Dd::from(x.ln());
        for _ in 0..2 {
            y = y + ((-y).exp().mul_f64(x) - Dd::from(1.0));
        }
        y
    }
}
