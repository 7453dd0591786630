//! Replaying users' ratings one at a time against a model fitted on full
//! histories: how often the prefix already lands in the final cluster, how
//! good the occupied cluster is, and where the gains level off.

mod breakpoint;
mod curves;
mod intersection;

use crate::dataset::RatingMatrix;

pub use breakpoint::{
    detect_breakpoint, detect_breakpoint_xy, fit_line, BreakpointMethod, BreakpointReport, LineFit,
    MIN_SEGMENT_POINTS,
};
pub use curves::{
    quality_curve, success_curve, trajectories, QualityCurve, QualityPoint, SuccessCurve,
    SuccessPoint, Trajectory,
};
pub use intersection::{regression_intersection, IntersectionReport};

/// `users` split by whether they rated exactly `min_len` items.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohorts {
    pub min_len: usize,
    pub at_minimum: Vec<usize>,
    pub above_minimum: Vec<usize>,
}

pub fn cohorts(m: &RatingMatrix, users: &[usize], min_len: usize) -> Cohorts {
    let (at_minimum, above_minimum) = users
        .iter()
        .copied()
        .partition(|&u| m.rows()[u].len() == min_len);
    Cohorts {
        min_len,
        at_minimum,
        above_minimum,
    }
}

/// Centered moving average over complete windows only (`len - window + 1`
/// values).
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    if window == 0 || values.len() < window {
        return Vec::new();
    }
    values
        .windows(window)
        .map(|w| w.iter().sum::<f64>() / window as f64)
        .collect()
}
