//! Large-magnitude limit of the first-order bound for orders below `r`.
//!
//! As `l` grows, the tail member's knots pair up into dipoles at centers `b_i`
//! with weights `w_i = l * gap_i`; with an odd number of tail orders the
//! smallest knot sinks to 0 and only feeds the top tail order. The limit
//! therefore solves
//!
//! `sum_i w_i b_i^e / e! + [k = top] s = M_k`, `e = r - 1 - k`,
//!
//! and `bound(l)` approaches `sum_i w_i b_i^(r-1-k1) / (r-1-k1)!`. Samples along a
//! geometric schedule are extrapolated in `eps = l^(-1/q)` and seed that system.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::factorial;
use crate::solver::{min_l_normalized, newton, tail_bound, top_normalization, MinimalMagnitude, SquareSystem};
use crate::spline::{check_order, check_positive, validate_orders, AlternatingSpline};

use super::verdict::DecisionConfig;

/// Relative slack allowed when checking that samples do not increase.
pub const MONOTONE_SLACK: f64 = 1e-9;
/// Samples stop once a knot pair is this close relative to the largest knot;
/// tighter pairs lose too many digits to be informative.
const PAIR_RESOLUTION: f64 = 1e-6;
const EXTRAPOLATION_TOLERANCE: f64 = 1e-6;
const POLISH_CONSISTENCY: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitMethod {
    /// A single tail order: the bound tends to 0.
    Exact,
    /// Solution of the dipole limit system.
    LimitSystem,
    /// Polynomial extrapolation of the samples.
    Extrapolation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub limit: f64,
    /// `(l, bound(l))` along the schedule.
    pub samples: Vec<(f64, f64)>,
    /// Samples are nonincreasing within [`MONOTONE_SLACK`].
    pub monotone: bool,
    /// Last extrapolated value, when at least three samples exist.
    pub extrapolated: Option<f64>,
    pub method: LimitMethod,
}

/// Infimum over `l` of the `k1` norm of the spline with magnitude `l` matching the tail targets.
pub fn estimate_limit(
    r: u32,
    k1: u32,
    tail_orders: &[u32],
    tail_targets: &[f64],
    config: &DecisionConfig,
) -> Result<LimitEstimate> {
    config.validate()?;
    check_order(r)?;
    validate_orders(r, tail_orders)?;
    if tail_orders.is_empty() {
        return Err(Error::invalid("tail_orders", "at least one tail order is required"));
    }
    if tail_orders.len() != tail_targets.len() {
        return Err(Error::invalid("tail_targets", "one target per tail order is required"));
    }
    check_positive("tail_targets", tail_targets)?;
    if *tail_orders.last().expect("nonempty") >= r {
        return Err(Error::invalid("tail_orders", "tail orders must lie below r"));
    }
    if k1 >= tail_orders[0] {
        return Err(Error::invalid("k1", "must lie below every tail order"));
    }

    let t = top_normalization(r, tail_orders, tail_targets);
    let targets: Vec<f64> = tail_orders.iter().zip(tail_targets).map(|(&k, &m)| m * t.norm_factor(k)).collect();
    let unscale_l = |l: f64| l / t.norm_factor(r);
    let unscale_bound = |b: f64| b / t.norm_factor(k1);

    let n = tail_orders.len();
    let l0 = if n == 1 {
        1.0
    } else {
        match min_l_normalized(r, tail_orders, &targets)? {
            MinimalMagnitude::Unattained { l_inf } => l_inf * config.limit_factor,
            attained => attained.l(),
        }
    };

    let mut samples = Vec::new();
    let mut last_member = None;
    for m in 0..=config.limit_stages {
        let l = l0 * config.limit_factor.powi(m as i32);
        let sample = match tail_bound(r, k1, tail_orders, &targets, l) {
            Ok(Some(sample)) => sample,
            Ok(None) if m == 0 => continue,
            Ok(None) => return Err(Error::numerical(0, format!("no family member at l = {l:e}"))),
            Err(_) if samples.len() >= 3 => break,
            Err(e) => return Err(e),
        };
        let (bound, member) = sample;
        if n > 1 && m > 0 && tightest_pair(&member) < PAIR_RESOLUTION && samples.len() >= 3 {
            break;
        }
        samples.push((l, bound));
        last_member = Some(member);
    }
    let monotone = samples.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + MONOTONE_SLACK));
    let out_samples: Vec<(f64, f64)> = samples.iter().map(|&(l, b)| (unscale_l(l), unscale_bound(b))).collect();

    if n == 1 {
        return Ok(LimitEstimate {
            limit: 0.0,
            samples: out_samples,
            monotone,
            extrapolated: None,
            method: LimitMethod::Exact,
        });
    }

    let q = if n.is_multiple_of(2) { 1 } else { r - tail_orders[n - 1] };
    let estimates = extrapolate(&samples, q);
    let extrapolated = estimates.last().copied();
    let converged = estimates.len() >= 2 && {
        let (a, b) = (estimates[estimates.len() - 2], estimates[estimates.len() - 1]);
        (a - b).abs() <= EXTRAPOLATION_TOLERANCE * b.abs()
    };
    let smallest_sample = samples.iter().map(|s| s.1).fold(f64::INFINITY, f64::min);

    let polished = last_member.and_then(|member| {
        let l = samples.last().map(|s| s.0)?;
        let limit = DipoleLimit::new(r, tail_orders, &targets);
        let solution = limit.solve_from(&member, l)?;
        Some(limit.bound(k1, &solution))
    });
    let accept_polish = |value: f64| {
        value > 0.0
            && value <= smallest_sample * (1.0 + MONOTONE_SLACK)
            && extrapolated.is_none_or(|c0| (value - c0).abs() <= POLISH_CONSISTENCY * value)
    };
    let (limit, method) = match polished {
        Some(value) if accept_polish(value) => (value, LimitMethod::LimitSystem),
        _ if converged => (extrapolated.expect("converged implies an estimate"), LimitMethod::Extrapolation),
        _ => {
            return Err(Error::numerical(
                0,
                format!("large-magnitude limit did not converge; samples {out_samples:?}"),
            ))
        }
    };
    Ok(LimitEstimate {
        limit: unscale_bound(limit),
        samples: out_samples,
        monotone,
        extrapolated: extrapolated.map(unscale_bound),
        method,
    })
}

/// Smallest gap relative to the largest knot.
fn tightest_pair(member: &AlternatingSpline) -> f64 {
    let a1 = member.knots().first().copied().unwrap_or(1.0);
    member.gaps().iter().map(|g| g / a1).fold(f64::INFINITY, f64::min)
}

/// Quadratic extrapolation to `eps = 0` through each consecutive triple, `eps = l^(-1/q)`.
fn extrapolate(samples: &[(f64, f64)], q: u32) -> Vec<f64> {
    let eps = |l: f64| l.powf(-1.0 / q as f64);
    samples
        .windows(3)
        .map(|w| {
            let (x0, x1, x2) = (eps(w[0].0), eps(w[1].0), eps(w[2].0));
            let (y0, y1, y2) = (w[0].1, w[1].1, w[2].1);
            // Lagrange basis evaluated at 0.
            y0 * x1 * x2 / ((x0 - x1) * (x0 - x2))
                + y1 * x0 * x2 / ((x1 - x0) * (x1 - x2))
                + y2 * x0 * x1 / ((x2 - x0) * (x2 - x1))
        })
        .collect()
}

/// Dipole limit system of the tail; unknowns `(w_1, b_1, ..., w_P, b_P[, s])`.
struct DipoleLimit<'a> {
    r: u32,
    orders: &'a [u32],
    targets: &'a [f64],
}

impl<'a> DipoleLimit<'a> {
    fn new(r: u32, orders: &'a [u32], targets: &'a [f64]) -> Self {
        Self { r, orders, targets }
    }

    fn pairs(&self) -> usize {
        self.orders.len() / 2
    }

    fn has_slack(&self) -> bool {
        self.orders.len() % 2 == 1
    }

    /// Seeds from a family member at magnitude `l` and solves.
    fn solve_from(&self, member: &AlternatingSpline, l: f64) -> Option<DVector<f64>> {
        let n = self.orders.len();
        let (knots, gaps) = (member.knots(), member.gaps());
        if knots.len() != n {
            return None;
        }
        let mut v = Vec::with_capacity(n);
        for i in 0..self.pairs() {
            let (a, b) = (knots[2 * i], knots[2 * i + 1]);
            v.push(l * gaps[2 * i]);
            v.push(0.5 * (a + b));
        }
        if self.has_slack() {
            let q = self.r - self.orders[n - 1];
            v.push(l * knots[n - 1].powi(q as i32) / factorial(q));
        }
        newton(self, DVector::from_vec(v)).ok().map(|c| c.v)
    }

    fn bound(&self, k1: u32, v: &DVector<f64>) -> f64 {
        let e = self.r - 1 - k1;
        (0..self.pairs())
            .map(|i| v[2 * i] * v[2 * i + 1].powi(e as i32) / factorial(e))
            .sum()
    }
}

impl SquareSystem for DipoleLimit<'_> {
    fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        let top = self.orders.len() - 1;
        DVector::from_iterator(
            self.orders.len(),
            self.orders.iter().zip(self.targets).enumerate().map(|(row, (&k, &m))| {
                let e = self.r - 1 - k;
                let mut sum: f64 = (0..self.pairs())
                    .map(|i| v[2 * i] * v[2 * i + 1].powi(e as i32) / factorial(e))
                    .sum();
                if self.has_slack() && row == top {
                    sum += v[v.len() - 1];
                }
                sum / m - 1.0
            }),
        )
    }

    fn jacobian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let n = self.orders.len();
        let mut jac = DMatrix::zeros(n, v.len());
        for (row, (&k, &m)) in self.orders.iter().zip(self.targets).enumerate() {
            let e = self.r - 1 - k;
            for i in 0..self.pairs() {
                let (w, b) = (v[2 * i], v[2 * i + 1]);
                jac[(row, 2 * i)] = b.powi(e as i32) / factorial(e) / m;
                if e > 0 {
                    jac[(row, 2 * i + 1)] = w * b.powi(e as i32 - 1) / factorial(e - 1) / m;
                }
            }
            if self.has_slack() && row == n - 1 {
                jac[(row, v.len() - 1)] = 1.0 / m;
            }
        }
        jac
    }

    fn feasible(&self, v: &DVector<f64>) -> bool {
        if v.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let centers: Vec<f64> = (0..self.pairs()).map(|i| v[2 * i + 1]).collect();
        (0..self.pairs()).all(|i| v[2 * i] > 0.0 && v[2 * i + 1] > 0.0)
            && centers.windows(2).all(|w| w[0] > w[1])
            && (!self.has_slack() || v[v.len() - 1] >= 0.0)
    }

    fn noise_floor(&self, v: &DVector<f64>, jac: &DMatrix<f64>) -> f64 {
        let mut floor: f64 = 0.0;
        for i in 0..jac.nrows() {
            let s: f64 = (0..jac.ncols()).map(|j| (jac[(i, j)] * v[j]).abs()).sum();
            floor = floor.max(f64::EPSILON * (s + self.r as f64));
        }
        floor
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_order_tail_closed_form() {
        let cfg = DecisionConfig::default();
        let est = estimate_limit(3, 0, &[1, 2], &[1.0, 1.0], &cfg).unwrap();
        assert_relative_eq!(est.limit, 0.5, max_relative = 1e-10);
        assert!(est.monotone);
        assert_relative_eq!(est.samples[0].0, 0.5, max_relative = 1e-12);
        assert_relative_eq!(est.samples[0].1, 2.0 / 3.0, max_relative = 1e-9);
        for &(l, b) in &est.samples {
            assert_relative_eq!(b, 0.5 + 1.0 / (24.0 * l * l), max_relative = 1e-8);
        }
        let est = estimate_limit(3, 0, &[1, 2], &[2.0, 2.0], &cfg).unwrap();
        assert_relative_eq!(est.limit, 1.0, max_relative = 1e-10);
    }

    #[test]
    fn odd_tail_matches_dipole_closed_form() {
        // Tail (2, 3, 4) at r = 6: one dipole at b = 3 M2 / M3 carrying weight
        // w = 2 M2 / b^2 ... evaluated independently: L = M2 * b / 4 with b = 3 M2 / M3.
        let (m2, m3, m4) = (0.9, 1.3, 2.0);
        let cfg = DecisionConfig::default();
        let est = estimate_limit(6, 1, &[2, 3, 4], &[m2, m3, m4], &cfg).unwrap();
        let b = 3.0 * m2 / m3;
        assert_relative_eq!(est.limit, m2 * b / 4.0, max_relative = 1e-9);
        assert_eq!(est.method, LimitMethod::LimitSystem);
        assert!(est.monotone);
    }

    #[test]
    fn single_order_tail_tends_to_zero() {
        let est = estimate_limit(4, 0, &[2], &[1.0], &DecisionConfig::default()).unwrap();
        assert_eq!(est.limit, 0.0);
        assert!(est.monotone);
    }

    #[test]
    fn rejects_bad_k1() {
        assert!(estimate_limit(3, 1, &[1, 2], &[1.0, 1.0], &DecisionConfig::default()).is_err());
    }
}
