use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spline::{AlternatingSpline, DEFAULT_GRID_SIZE};

/// Class of an admissible target vector, named by its extremal witness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplineType {
    /// Witness with exactly `d - 1` knots and no constant.
    Type1,
    /// Witness with at most `d - 2` knots and no constant.
    Type2,
    /// Witness with a positive constant; only when the lowest order is 0.
    Type3,
    /// Orders below `r` only: the minimal r-th norm is an infimum that no
    /// spline attains. The witness is a family member with `d` knots above it.
    Extended,
    None,
}

impl SplineType {
    pub fn label(self) -> &'static str {
        match self {
            SplineType::Type1 => "Type 1",
            SplineType::Type2 => "Type 2",
            SplineType::Type3 => "Type 3",
            SplineType::Extended => "Extended",
            SplineType::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certainty {
    Certain,
    /// An equality test at the decisive comparison was resolved by the tolerance.
    BoundaryAtTolerance,
}

/// Outcome of [`decide`](super::decide).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub admissible: bool,
    #[serde(rename = "type")]
    pub spline_type: SplineType,
    /// Present iff admissible; matches every target.
    pub witness: Option<AlternatingSpline>,
    /// Index into the orders at which the decision resolved.
    pub binding_stage: usize,
    /// `M_i` minus the bound it was compared with; `None` where no comparison happened.
    pub margins: Vec<Option<f64>>,
    pub certainty: Certainty,
    /// Intermediate splines, fewest knots first.
    #[serde(default)]
    pub stages: Vec<AlternatingSpline>,
    /// Orders below `r` only: infimum of the r-th norm over functions with these norms.
    #[serde(default)]
    pub r_norm_floor: Option<f64>,
}

impl Verdict {
    pub(crate) fn inadmissible(binding_stage: usize, margins: Vec<Option<f64>>, certainty: Certainty) -> Self {
        Verdict {
            admissible: false,
            spline_type: SplineType::None,
            witness: None,
            binding_stage,
            margins,
            certainty,
            stages: Vec::new(),
            r_norm_floor: None,
        }
    }
}

/// Tunables of the decision engine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionConfig {
    /// Relative tolerance for equality at stage boundaries.
    pub equality_tolerance: f64,
    /// Geometric factor of the large-magnitude sweep.
    pub limit_factor: f64,
    /// Maximum number of sweep samples after the first.
    pub limit_stages: usize,
    /// Points of the validation grid.
    pub grid_size: usize,
}

impl Default for DecisionConfig {
    fn default() -> Self {
        Self {
            equality_tolerance: 1e-9,
            limit_factor: 4.0,
            limit_stages: 20,
            grid_size: DEFAULT_GRID_SIZE,
        }
    }
}

impl DecisionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.equality_tolerance > 0.0 && self.equality_tolerance < 1e-3) {
            return Err(Error::invalid("tolerance", "must lie in (0, 1e-3)"));
        }
        if !(self.limit_factor.is_finite() && self.limit_factor > 1.0) {
            return Err(Error::invalid("limit_factor", "must exceed 1"));
        }
        if self.limit_stages < 3 {
            return Err(Error::invalid("limit_stages", "at least 3 stages are needed to extrapolate"));
        }
        if self.grid_size < 2 {
            return Err(Error::invalid("grid_size", "at least 2 points are required"));
        }
        Ok(())
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.equality_tolerance = tolerance;
        self
    }
}
