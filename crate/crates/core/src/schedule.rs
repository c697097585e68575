//! Deterministic rate sequences: exploration rate, learning rate, loss bound,
//! period length and confidence level, each a pure power of the round index.

use serde::Serialize;

use crate::error::{FoeError, Result};

/// Per-round rates consumed by the master loop.
///
/// Implementors are evaluated only at rounds `t >= 1`.
pub trait Rates {
    /// Exploration probability, in `(0, 1]`.
    fn gamma_at(&self, t: u64) -> f64;
    /// Learning rate multiplying the cumulative estimated loss.
    fn eta_at(&self, t: u64) -> f64;
    /// Upper bound on the true losses of round `t`.
    fn loss_bound_at(&self, t: u64) -> f64;
}

/// Power-law schedule: `gamma_t = min(1, t^-g)`, `eta_t = t^-e`, `B_t = t^b`,
/// `T~_t = max(1, floor(t^p))` and `delta_T = T^-c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    gamma_exponent: f64,
    eta_exponent: f64,
    loss_bound_exponent: f64,
    period_exponent: f64,
    confidence_exponent: f64,
}

impl Schedule {
    pub fn new(
        gamma_exponent: f64,
        eta_exponent: f64,
        loss_bound_exponent: f64,
        period_exponent: f64,
        confidence_exponent: f64,
    ) -> Result<Self> {
        check_nonneg("gamma_exponent", gamma_exponent)?;
        check_nonneg("eta_exponent", eta_exponent)?;
        check_nonneg("loss_bound_exponent", loss_bound_exponent)?;
        check_nonneg("period_exponent", period_exponent)?;
        if !(confidence_exponent.is_finite() && confidence_exponent > 0.0) {
            return Err(FoeError::InvalidExponent {
                name: "confidence_exponent",
                value: confidence_exponent,
            });
        }
        Ok(Self {
            gamma_exponent,
            eta_exponent,
            loss_bound_exponent,
            period_exponent,
            confidence_exponent,
        })
    }

    /// Bounded losses: `gamma_t = t^-1/4`, `eta_t = t^-1/2`, `B_t = 1`, `delta_T = T^-2`.
    pub fn bounded_losses() -> Self {
        Self::new(0.25, 0.5, 0.0, 0.0, 2.0).expect("valid constants")
    }

    /// Growing losses: `gamma_t = t^-1/4`, `eta_t = t^-3/4`, `B_t = t^1/8`.
    pub fn growing_losses() -> Self {
        Self::new(0.25, 0.75, 0.125, 0.0, 2.0).expect("valid constants")
    }

    /// Entering experts with bounded losses (pair with `alpha = 8`).
    pub fn entering_bounded() -> Self {
        Self::new(0.25, 0.75, 0.0, 0.0, 2.0).expect("valid constants")
    }

    /// Entering experts with `B_t = t^1/16` (pair with `alpha = 16`).
    pub fn entering_growing() -> Self {
        Self::new(0.25, 0.75, 0.0625, 0.0, 2.0).expect("valid constants")
    }

    /// Period wrapper for a uniform prior: `T~_t = floor(t^1/8)`.
    pub fn wrapped_uniform() -> Self {
        Self::new(0.25, 0.75, 0.0, 0.125, 2.0).expect("valid constants")
    }

    /// Period wrapper for a general prior: `T~_t = floor(t^1/16)`.
    pub fn wrapped_general() -> Self {
        Self::new(0.25, 0.75, 0.0, 0.0625, 2.0).expect("valid constants")
    }

    pub fn with_period_exponent(self, period_exponent: f64) -> Result<Self> {
        Self::new(
            self.gamma_exponent,
            self.eta_exponent,
            self.loss_bound_exponent,
            period_exponent,
            self.confidence_exponent,
        )
    }

    pub fn gamma_exponent(&self) -> f64 {
        self.gamma_exponent
    }

    pub fn eta_exponent(&self) -> f64 {
        self.eta_exponent
    }

    pub fn loss_bound_exponent(&self) -> f64 {
        self.loss_bound_exponent
    }

    pub fn period_exponent(&self) -> f64 {
        self.period_exponent
    }

    pub fn confidence_exponent(&self) -> f64 {
        self.confidence_exponent
    }

    pub fn gamma(&self, t: u64) -> Result<f64> {
        check_round(t)?;
        Ok(self.gamma_at(t))
    }

    pub fn eta(&self, t: u64) -> Result<f64> {
        check_round(t)?;
        Ok(self.eta_at(t))
    }

    pub fn loss_bound(&self, t: u64) -> Result<f64> {
        check_round(t)?;
        Ok(self.loss_bound_at(t))
    }

    /// Number of base rounds handed to the chosen expert at master round `t`.
    pub fn period_length(&self, t: u64) -> Result<u64> {
        check_round(t)?;
        Ok(self.period_length_at(t))
    }

    pub(crate) fn period_length_at(&self, t: u64) -> u64 {
        if self.period_exponent == 0.0 {
            return 1;
        }
        floor_pow(t, self.period_exponent).max(1)
    }

    /// Confidence parameter `delta_T = T^-c` of the high-probability bounds.
    pub fn delta(&self, horizon: u64) -> Result<f64> {
        check_round(horizon)?;
        Ok((horizon as f64).powf(-self.confidence_exponent))
    }
}

impl Rates for Schedule {
    fn gamma_at(&self, t: u64) -> f64 {
        (t as f64).powf(-self.gamma_exponent).min(1.0)
    }

    fn eta_at(&self, t: u64) -> f64 {
        (t as f64).powf(-self.eta_exponent)
    }

    fn loss_bound_at(&self, t: u64) -> f64 {
        (t as f64).powf(self.loss_bound_exponent)
    }
}

/// Time-invariant rates, used by the statistical checks that pin `gamma` and
/// `eta` to fixed values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstantRates {
    pub gamma: f64,
    pub eta: f64,
    pub loss_bound: f64,
}

impl ConstantRates {
    /// `eta = 0` is accepted: it switches off the loss term in the perturbed score.
    pub fn new(gamma: f64, eta: f64, loss_bound: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(FoeError::InvalidArgument(format!(
                "exploration rate must lie in (0, 1], got {gamma}"
            )));
        }
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(FoeError::InvalidArgument(format!(
                "learning rate must be finite and >= 0, got {eta}"
            )));
        }
        if !(loss_bound.is_finite() && loss_bound >= 0.0) {
            return Err(FoeError::InvalidArgument(format!(
                "loss bound must be finite and >= 0, got {loss_bound}"
            )));
        }
        Ok(Self {
            gamma,
            eta,
            loss_bound,
        })
    }
}

impl Rates for ConstantRates {
    fn gamma_at(&self, _t: u64) -> f64 {
        self.gamma
    }

    fn eta_at(&self, _t: u64) -> f64 {
        self.eta
    }

    fn loss_bound_at(&self, _t: u64) -> f64 {
        self.loss_bound
    }
}

pub(crate) fn check_round(t: u64) -> Result<()> {
    if t == 0 {
        Err(FoeError::InvalidRound(t))
    } else {
        Ok(())
    }
}

fn check_nonneg(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(FoeError::InvalidExponent { name, value })
    }
}

/// `floor(t^e)` with exact integer powers snapped (`256^0.125` is 2, not 1.999..).
fn floor_pow(t: u64, e: f64) -> u64 {
    let x = (t as f64).powf(e);
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as u64
    } else {
        x.floor() as u64
    }
}
