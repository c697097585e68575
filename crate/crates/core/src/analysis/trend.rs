//! Per-round regret across growing horizons.

use serde::Serialize;

use crate::error::{FoeError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendPoint {
    pub horizon: u64,
    /// Regret divided by the horizon.
    pub per_round_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendReport {
    pub points: Vec<TrendPoint>,
    pub factor: f64,
    /// `first / last`; infinite when the last value is not positive.
    pub reduction: f64,
    pub passed: bool,
}

/// Passes when the last per-round regret is at most the first divided by
/// `factor`, or both are non-positive.
pub fn hannan_trend(points: Vec<TrendPoint>, factor: f64) -> Result<TrendReport> {
    if points.len() < 2 {
        return Err(FoeError::InvalidArgument("trend needs at least two horizons".into()));
    }
    if points.windows(2).any(|w| w[1].horizon <= w[0].horizon) {
        return Err(FoeError::InvalidArgument("trend horizons must increase".into()));
    }
    let first = points[0].per_round_regret;
    let last = points[points.len() - 1].per_round_regret;
    let passed = last <= 0.0 || last * factor <= first;
    let reduction = if last > 0.0 { first / last } else { f64::INFINITY };
    Ok(TrendReport {
        points,
        factor,
        reduction,
        passed,
    })
}
