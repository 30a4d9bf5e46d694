use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

use super::newton::SquareSystem;
use crate::numeric::{alternating_power_sum, factorial, knot_gaps};
use crate::spline::{check_knots, check_order, check_positive, validate_orders, AlternatingSpline, ScaleTransform};

/// Magnitude `l` of the r-th derivative in a moment system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Magnitude {
    Fixed(f64),
    /// `l` is an unknown alongside the knots.
    Free,
}

/// Equations `(l/(r-k_i)!) * sum_j (-1)^(j+1) a_j^(r-k_i) = M_{k_i}` pinning knots to targets.
///
/// All constrained orders are below `r`; the r-th norm is `l` itself and is
/// either fixed or solved for.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSystem {
    r: u32,
    orders: Vec<u32>,
    targets: Vec<f64>,
    magnitude: Magnitude,
}

impl MomentSystem {
    pub fn new(r: u32, orders: Vec<u32>, targets: Vec<f64>, magnitude: Magnitude) -> Result<Self> {
        check_order(r)?;
        validate_orders(r, &orders)?;
        if orders.last().is_some_and(|&k| k >= r) {
            return Err(Error::invalid("orders", "constrained orders must lie below r"));
        }
        if orders.len() != targets.len() {
            return Err(Error::invalid(
                "targets",
                format!("{} orders but {} targets", orders.len(), targets.len()),
            ));
        }
        if !targets.is_empty() {
            check_positive("targets", &targets)?;
        }
        if let Magnitude::Fixed(l) = magnitude {
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::invalid("l", format!("{l} is not a positive finite number")));
            }
        }
        Ok(Self {
            r,
            orders,
            targets,
            magnitude,
        })
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn orders(&self) -> &[u32] {
        &self.orders
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn magnitude(&self) -> Magnitude {
        self.magnitude
    }

    pub fn equation_count(&self) -> usize {
        self.orders.len()
    }

    /// Knot count that makes the system square.
    pub fn square_knot_count(&self) -> usize {
        match self.magnitude {
            Magnitude::Fixed(_) => self.orders.len(),
            Magnitude::Free => self.orders.len().saturating_sub(1),
        }
    }

    /// The system solved by the transformed splines.
    pub(crate) fn scaled(&self, transform: &ScaleTransform) -> Self {
        Self {
            r: self.r,
            orders: self.orders.clone(),
            targets: self
                .orders
                .iter()
                .zip(&self.targets)
                .map(|(&k, &m)| m * transform.norm_factor(k))
                .collect(),
            magnitude: match self.magnitude {
                Magnitude::Fixed(l) => Magnitude::Fixed(l * transform.norm_factor(self.r)),
                Magnitude::Free => Magnitude::Free,
            },
        }
    }

    /// Absolute residuals `F_i = ||phi^(k_i)|| - M_{k_i}`.
    pub fn residual(&self, knots: &[f64], l: f64) -> Result<Vec<f64>> {
        check_knots("knots", knots)?;
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::invalid("l", format!("{l} is not a positive finite number")));
        }
        let gaps = knot_gaps(knots);
        let unknowns = knots.len() + usize::from(self.magnitude == Magnitude::Free);
        if unknowns != self.orders.len() {
            return Err(Error::invalid(
                "knots",
                format!("{} unknowns for {} equations", unknowns, self.orders.len()),
            ));
        }
        Ok(self
            .orders
            .iter()
            .zip(&self.targets)
            .map(|(&k, &m)| norm_of(self.r, k, knots, &gaps, l) - m)
            .collect())
    }

    /// True when `spline` meets every target to relative `tolerance`.
    pub fn is_satisfied_by(&self, spline: &AlternatingSpline, tolerance: f64) -> bool {
        if let Magnitude::Fixed(l) = self.magnitude {
            if (spline.l() - l).abs() > tolerance * l {
                return false;
            }
        }
        self.orders
            .iter()
            .zip(&self.targets)
            .all(|(&k, &m)| (norm_of(self.r, k, spline.knots(), spline.gaps(), spline.l()) - m).abs() <= tolerance * m)
    }
}

/// Transform taking a spline with magnitude `l` and largest knot `a1` to one
/// with unit magnitude and unit largest knot.
pub(crate) fn normalizing(r: u32, l: f64, a1: f64) -> ScaleTransform {
    let alpha = (-(l.ln()) - r as f64 * a1.ln()).exp();
    ScaleTransform::new(alpha, a1).expect("positive finite normalization")
}

/// Norm of order `k < r` of the alternating spline with the given knots and gaps.
pub(crate) fn norm_of(r: u32, k: u32, knots: &[f64], gaps: &[f64], l: f64) -> f64 {
    let p = r - k;
    l / factorial(p) * alternating_power_sum(knots, gaps, p)
}

/// Knots together with their exact gaps.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct KnotState {
    pub knots: Vec<f64>,
    pub gaps: Vec<f64>,
}

impl KnotState {
    pub fn of(spline: &AlternatingSpline) -> Self {
        Self {
            knots: spline.knots().to_vec(),
            gaps: spline.gaps().to_vec(),
        }
    }

    pub fn from_knots(knots: &[f64]) -> Self {
        Self {
            knots: knots.to_vec(),
            gaps: knot_gaps(knots),
        }
    }

    /// Knots `smallest + sum_{i >= j} gaps[i]`.
    pub fn from_gaps(smallest: f64, gaps: &[f64]) -> Self {
        let mut knots = vec![smallest; gaps.len() + 1];
        for j in (0..gaps.len()).rev() {
            knots[j] = knots[j + 1] + gaps[j];
        }
        Self {
            knots,
            gaps: gaps.to_vec(),
        }
    }

    pub fn smallest(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            knots: self.knots.iter().map(|a| a * factor).collect(),
            gaps: self.gaps.iter().map(|g| g * factor).collect(),
        }
    }

    /// Appends a knot below the current smallest one.
    pub fn push(&mut self, a: f64) {
        if let Some(&last) = self.knots.last() {
            self.gaps.push(last - a);
        }
        self.knots.push(a);
    }

    pub fn spline(&self, r: u32, l: f64) -> Result<AlternatingSpline> {
        if self.knots.is_empty() {
            return AlternatingSpline::new(r, l, Vec::new());
        }
        AlternatingSpline::from_gaps(r, l, self.smallest(), self.gaps.clone(), 0.0)
    }
}

/// Layout of the Newton unknowns.
///
/// Knots are carried as gaps so that close pairs keep their relative
/// precision. Without a frozen knot the unknowns are `(g_1, ..., g_{n-1}, a_n)`;
/// with a frozen smallest knot `p` they are `(g_1, ..., g_n)` with
/// `g_n = a_n - p`. A free `l` comes last.
#[derive(Debug, Clone)]
pub(crate) struct Layout<'a> {
    pub system: &'a MomentSystem,
    pub frozen_smallest: Option<f64>,
}

impl<'a> Layout<'a> {
    pub fn new(system: &'a MomentSystem, frozen_smallest: Option<f64>) -> Self {
        Self {
            system,
            frozen_smallest,
        }
    }

    pub fn l_is_free(&self) -> bool {
        self.system.magnitude == Magnitude::Free
    }

    pub fn knot_unknowns(&self, vars: usize) -> usize {
        vars - usize::from(self.l_is_free())
    }

    /// Knots and gaps, the frozen knot last.
    pub fn state(&self, v: &DVector<f64>) -> KnotState {
        let n = self.knot_unknowns(v.len());
        match self.frozen_smallest {
            Some(p) => KnotState::from_gaps(p, &v.as_slice()[..n]),
            None if n == 0 => KnotState {
                knots: Vec::new(),
                gaps: Vec::new(),
            },
            None => KnotState::from_gaps(v[n - 1], &v.as_slice()[..n - 1]),
        }
    }

    pub fn l(&self, v: &DVector<f64>) -> f64 {
        match self.system.magnitude {
            Magnitude::Fixed(l) => l,
            Magnitude::Free => v[v.len() - 1],
        }
    }

    /// Unknowns of `state` (frozen knot included last when the layout freezes one).
    pub fn pack(&self, state: &KnotState, l: f64) -> DVector<f64> {
        let mut v = state.gaps.clone();
        if self.frozen_smallest.is_none() && !state.knots.is_empty() {
            v.push(state.smallest());
        }
        if self.l_is_free() {
            v.push(l);
        }
        DVector::from_vec(v)
    }

    /// Derivative of the relative residual with respect to the frozen knot, gaps held fixed.
    pub fn frozen_derivative(&self, v: &DVector<f64>) -> Option<DVector<f64>> {
        self.frozen_smallest?;
        let state = self.state(v);
        let l = self.l(v);
        let sys = self.system;
        Some(DVector::from_iterator(
            sys.orders.len(),
            sys.orders.iter().zip(&sys.targets).map(|(&k, &m)| {
                let q = sys.r - k - 1;
                l / factorial(q) / m * alternating_power_sum(&state.knots, &state.gaps, q)
            }),
        ))
    }
}

impl SquareSystem for Layout<'_> {
    fn feasible(&self, v: &DVector<f64>) -> bool {
        if v.iter().any(|x| !x.is_finite()) {
            return false;
        }
        let n = self.knot_unknowns(v.len());
        if v.iter().take(n).any(|&x| x <= 0.0) {
            return false;
        }
        !(self.l_is_free() && self.l(v) <= 0.0)
    }

    /// Residuals relative to each target.
    fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        let state = self.state(v);
        let l = self.l(v);
        let sys = self.system;
        DVector::from_iterator(
            sys.orders.len(),
            sys.orders
                .iter()
                .zip(&sys.targets)
                .map(|(&k, &m)| norm_of(sys.r, k, &state.knots, &state.gaps, l) / m - 1.0),
        )
    }

    /// Jacobian of [`Self::residual`] with respect to the unknowns.
    ///
    /// Raising `g_i` shifts knots `1..=i`, raising `a_n` shifts them all, so
    /// each column is a partial alternating sum of the knot derivatives.
    fn jacobian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let state = self.state(v);
        let l = self.l(v);
        let sys = self.system;
        let n = self.knot_unknowns(v.len());
        let mut jac = DMatrix::zeros(sys.orders.len(), v.len());
        for (i, (&k, &m)) in sys.orders.iter().zip(&sys.targets).enumerate() {
            let q = sys.r - k - 1;
            let scale = l / factorial(q) / m;
            for j in 0..n {
                let shifted = if self.frozen_smallest.is_none() && j + 1 == n {
                    state.knots.len()
                } else {
                    j + 1
                };
                jac[(i, j)] = scale * alternating_power_sum(&state.knots[..shifted], &state.gaps, q);
            }
            if self.l_is_free() {
                jac[(i, n)] = norm_of(sys.r, k, &state.knots, &state.gaps, l) / (l * m);
            }
        }
        jac
    }

    /// Residual level explained by rounding the unknowns to double precision.
    fn noise_floor(&self, v: &DVector<f64>, jac: &DMatrix<f64>) -> f64 {
        let eps = f64::EPSILON;
        let mut floor: f64 = 0.0;
        for i in 0..jac.nrows() {
            let mut s = 0.0;
            for j in 0..jac.ncols() {
                s += (jac[(i, j)] * v[j]).abs();
            }
            let p = (self.system.r - self.system.orders[i]) as f64;
            floor = floor.max(eps * (s + p));
        }
        floor
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::newton::SquareSystem;
    use approx::assert_relative_eq;

    #[test]
    fn residual_examples() {
        let sys = MomentSystem::new(3, vec![1, 2], vec![1.5, 1.0], Magnitude::Fixed(1.0)).unwrap();
        let f = sys.residual(&[2.0, 1.0], 1.0).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-15));

        let sys = MomentSystem::new(2, vec![1], vec![2.0], Magnitude::Fixed(1.0)).unwrap();
        assert_eq!(sys.residual(&[1.0], 1.0).unwrap(), vec![-1.0]);

        let sys = MomentSystem::new(2, vec![0, 1], vec![0.7, 1.0], Magnitude::Fixed(1.0)).unwrap();
        let f = sys.residual(&[1.2, 0.2], 1.0).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-15), "{f:?}");
    }

    #[test]
    fn residual_rejects_dimension_mismatch() {
        let sys = MomentSystem::new(3, vec![1, 2], vec![1.5, 1.0], Magnitude::Fixed(1.0)).unwrap();
        assert!(matches!(sys.residual(&[1.0], 1.0), Err(Error::InvalidArgument { .. })));
        assert!(matches!(sys.residual(&[1.0, 2.0], 1.0), Err(Error::InvalidArgument { .. })));
    }

    #[test]
    fn system_rejects_order_r() {
        assert!(MomentSystem::new(3, vec![1, 3], vec![1.0, 1.0], Magnitude::Free).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let sys = MomentSystem::new(5, vec![0, 2, 3], vec![0.9, 1.3, 2.0], Magnitude::Free).unwrap();
        let layout = Layout::new(&sys, None);
        let v = layout.pack(&KnotState::from_knots(&[2.1, 1.3]), 0.8);
        let jac = layout.jacobian(&v);
        for j in 0..v.len() {
            let h = 1e-6 * v[j];
            let mut plus = v.clone();
            plus[j] += h;
            let mut minus = v.clone();
            minus[j] -= h;
            let fd = (layout.residual(&plus) - layout.residual(&minus)) / (2.0 * h);
            for i in 0..3 {
                assert_relative_eq!(jac[(i, j)], fd[i], max_relative = 1e-7);
            }
        }
    }
}
