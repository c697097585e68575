//! Explicit high-probability regret bounds, evaluated term by term.
//!
//! Uniform prior (`n` experts, `k = ln n`, all active from round 1):
//!
//! ```text
//! ln n / eta_T + sum eta_t B_t^2 n^2 / gamma_t + sum gamma_t B_t
//!   + sqrt(2 ln(4 / delta_T)) * ( sqrt(sum B_t^2 n^2 / gamma_t^2) + sqrt(sum B_t^2) )
//! ```
//!
//! General prior with entering times, against comparator `i`:
//!
//! ```text
//! (k_i + 1) / eta_T + sum_{t < tau_i} B_t / (gamma_t w*_t)
//!   + sum eta_t B_t^2 / (gamma_t w*_t^2) + sum gamma_t B_t
//!   + sqrt(2 ln(4 / delta_T)) * ( sqrt(sum B_t^2 / (gamma_t^2 w*_t^2)) + sqrt(sum B_t^2) )
//! ```
//!
//! Sums run over `t = 1..T` in increasing order with compensated summation.

use serde::Serialize;

use crate::error::{FoeError, Result};
use crate::family::ExpertFamily;
use crate::master::RoundRecord;
use crate::schedule::{Rates, Schedule};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// Uniform prior over finitely many experts.
    Uniform,
    /// Arbitrary prior with entering times.
    General,
}

/// Term-by-term evaluation of a bound at horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub horizon: u64,
    pub delta: f64,
    /// `ln n / eta_T` (uniform) or `(k_i + 1) / eta_T` (general).
    pub complexity: f64,
    /// Pessimistic estimates charged before the comparator entered; zero for uniform priors.
    pub entry_cost: f64,
    pub perturbation: f64,
    pub exploration: f64,
    /// Azuma deviation of the comparator's estimated loss.
    pub azuma_estimated: f64,
    /// Azuma deviation of the master's realized loss.
    pub azuma_realized: f64,
    /// Sum of the six terms above.
    pub total: f64,
    /// `(delta_T / 2) sum B^_t`, the extra term of the in-expectation variant.
    pub expectation_tail: f64,
    /// In-expectation variant: drops `azuma_realized`, adds `expectation_tail`.
    pub expectation_total: f64,
    /// False when the comparator had not entered by `T`; `entry_cost` then
    /// covers rounds `1..=T` only.
    pub comparator_entered: bool,
}

/// Running per-round sums shared by both bound forms.
#[derive(Debug, Clone)]
pub struct BoundAccumulator {
    kind: BoundKind,
    rounds: u64,
    last_eta: f64,
    perturbation: CompensatedSum,
    exploration: CompensatedSum,
    cap_squares: CompensatedSum,
    bound_squares: CompensatedSum,
    caps: CompensatedSum,
    /// `cap_prefix[t]` = `sum_{s <= t} B^_s`, with `cap_prefix[0] = 0`.
    cap_prefix: Vec<f64>,
    uniform_n: f64,
}

impl BoundAccumulator {
    pub fn uniform(n: usize) -> Self {
        Self::with_kind(BoundKind::Uniform, n as f64)
    }

    pub fn general() -> Self {
        Self::with_kind(BoundKind::General, f64::NAN)
    }

    fn with_kind(kind: BoundKind, uniform_n: f64) -> Self {
        Self {
            kind,
            rounds: 0,
            last_eta: f64::NAN,
            perturbation: CompensatedSum::default(),
            exploration: CompensatedSum::default(),
            cap_squares: CompensatedSum::default(),
            bound_squares: CompensatedSum::default(),
            caps: CompensatedSum::default(),
            cap_prefix: vec![0.0],
            uniform_n,
        }
    }

    pub fn rounds(&self) -> u64 {
        self.rounds
    }

    /// Adds round `rounds() + 1` with loss bound `b`, rates `gamma`, `eta` and
    /// smallest active weight `min_weight` (ignored for the uniform form).
    pub fn push(&mut self, b: f64, gamma: f64, eta: f64, min_weight: f64) {
        let (cap, perturbation) = match self.kind {
            BoundKind::Uniform => {
                let n = self.uniform_n;
                (b * n / gamma, eta * b * b * n * n / gamma)
            }
            BoundKind::General => (
                b / (gamma * min_weight),
                eta * b * b / (gamma * min_weight * min_weight),
            ),
        };
        self.rounds += 1;
        self.last_eta = eta;
        self.perturbation.add(perturbation);
        self.exploration.add(gamma * b);
        self.cap_squares.add(cap * cap);
        self.bound_squares.add(b * b);
        self.caps.add(cap);
        self.cap_prefix.push(self.caps.value());
    }

    /// Bound after the rounds pushed so far. `complexity` is `ln n` for the
    /// uniform form and `k_i` otherwise; `entering_time` is ignored for the
    /// uniform form.
    pub fn report(&self, complexity: f64, entering_time: u64, delta: f64) -> BoundReport {
        let horizon = self.rounds;
        let (complexity_term, entry_cost, entered) = match self.kind {
            BoundKind::Uniform => (complexity / self.last_eta, 0.0, true),
            BoundKind::General => {
                let entry_rounds = entering_time.saturating_sub(1).min(horizon);
                (
                    (complexity + 1.0) / self.last_eta,
                    self.cap_prefix[entry_rounds as usize],
                    entering_time <= horizon,
                )
            }
        };
        let azuma = (2.0 * (4.0 / delta).ln()).sqrt();
        let azuma_estimated = azuma * self.cap_squares.value().sqrt();
        let azuma_realized = azuma * self.bound_squares.value().sqrt();
        let perturbation = self.perturbation.value();
        let exploration = self.exploration.value();
        let expectation_tail = 0.5 * delta * self.caps.value();

        let mut total = CompensatedSum::default();
        for term in [
            complexity_term,
            entry_cost,
            perturbation,
            exploration,
            azuma_estimated,
            azuma_realized,
        ] {
            total.add(term);
        }
        let mut expectation_total = CompensatedSum::default();
        for term in [
            complexity_term,
            entry_cost,
            perturbation,
            exploration,
            azuma_estimated,
            expectation_tail,
        ] {
            expectation_total.add(term);
        }

        BoundReport {
            kind: self.kind,
            horizon,
            delta,
            complexity: complexity_term,
            entry_cost,
            perturbation,
            exploration,
            azuma_estimated,
            azuma_realized,
            total: total.value(),
            expectation_tail,
            expectation_total: expectation_total.value(),
            comparator_entered: entered,
        }
    }
}

/// Uniform-prior bound for `n` experts at horizon `T`.
pub fn uniform_prior_bound(n: usize, schedule: &Schedule, horizon: u64) -> Result<BoundReport> {
    if n == 0 {
        return Err(FoeError::EmptyFamily);
    }
    let delta = schedule.delta(horizon)?;
    let mut acc = BoundAccumulator::uniform(n);
    for t in 1..=horizon {
        acc.push(
            schedule.loss_bound_at(t),
            schedule.gamma_at(t),
            schedule.eta_at(t),
            1.0 / n as f64,
        );
    }
    Ok(acc.report((n as f64).ln(), 1, delta))
}

/// General-prior bound against `comparator` at horizon `T`.
pub fn general_prior_bound<S>(
    family: &ExpertFamily<S>,
    schedule: &Schedule,
    horizon: u64,
    comparator: usize,
) -> Result<BoundReport> {
    check_comparator(family.len(), comparator)?;
    let delta = schedule.delta(horizon)?;
    let mut acc = BoundAccumulator::general();
    let mut active = family.active_count(1);
    for t in 1..=horizon {
        while active < family.len() && family.expert(active).entering_time() <= t {
            active += 1;
        }
        acc.push(
            schedule.loss_bound_at(t),
            schedule.gamma_at(t),
            schedule.eta_at(t),
            family.min_weight_of_prefix(active),
        );
    }
    let e = family.expert(comparator);
    Ok(acc.report(e.complexity(), e.entering_time(), delta))
}

/// Accumulator filled from a run's own records, so wrapped runs use their
/// realized period lengths as `B_t`. Uniform families get the uniform form.
pub fn accumulate_records<S>(
    family: &ExpertFamily<S>,
    schedule: &Schedule,
    records: &[RoundRecord],
) -> BoundAccumulator {
    let mut acc = if family.is_uniform() {
        BoundAccumulator::uniform(family.len())
    } else {
        BoundAccumulator::general()
    };
    for r in records {
        acc.push(
            r.loss_bound,
            schedule.gamma_at(r.round),
            schedule.eta_at(r.round),
            family.min_active_weight(r.round),
        );
    }
    acc
}

/// Bound against `comparator` for the horizon covered by `records`.
pub fn bound_for_records<S>(
    family: &ExpertFamily<S>,
    schedule: &Schedule,
    records: &[RoundRecord],
    comparator: usize,
) -> Result<BoundReport> {
    check_comparator(family.len(), comparator)?;
    if records.is_empty() {
        return Err(FoeError::EmptyHorizon);
    }
    let acc = accumulate_records(family, schedule, records);
    Ok(report_against(&acc, family, schedule, comparator))
}

/// Bound against `comparator` after the rounds in `acc`, with `delta_T` from
/// the schedule's confidence exponent.
pub fn report_against<S>(
    acc: &BoundAccumulator,
    family: &ExpertFamily<S>,
    schedule: &Schedule,
    comparator: usize,
) -> BoundReport {
    let delta = (acc.rounds() as f64).powf(-schedule.confidence_exponent());
    let e = family.expert(comparator);
    if family.is_uniform() {
        acc.report((family.len() as f64).ln(), 1, delta)
    } else {
        acc.report(e.complexity(), e.entering_time(), delta)
    }
}

fn check_comparator(len: usize, index: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(FoeError::UnknownComparator { index, len })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn first_round_regression_value() {
        // n = 2, B = 1, gamma = eta = delta = 1:
        // ln 2 + 4 + 1 + sqrt(2 ln 4) * (2 + 1)
        let r = uniform_prior_bound(2, &Schedule::bounded_losses(), 1).unwrap();
        assert_eq!(r.delta, 1.0);
        assert_relative_eq!(r.complexity, 2f64.ln(), max_relative = 1e-15);
        assert_eq!(r.perturbation, 4.0);
        assert_eq!(r.exploration, 1.0);
        assert_relative_eq!(r.total, 10.688474847506132, max_relative = 1e-14);
        let coefficient = (2.0 * 4f64.ln()).sqrt();
        assert_relative_eq!(r.azuma_estimated, 2.0 * coefficient, max_relative = 1e-15);
        assert_relative_eq!(r.azuma_realized, coefficient, max_relative = 1e-15);
    }

    #[test]
    fn total_is_the_sum_of_terms() {
        for s in [Schedule::bounded_losses(), Schedule::growing_losses()] {
            let r = uniform_prior_bound(7, &s, 5000).unwrap();
            let sum = r.complexity + r.entry_cost + r.perturbation + r.exploration + r.azuma_estimated + r.azuma_realized;
            assert_relative_eq!(r.total, sum, max_relative = 1e-14);
            for term in [r.complexity, r.perturbation, r.exploration, r.azuma_estimated, r.azuma_realized] {
                assert!(term >= 0.0);
            }
            assert!(r.expectation_tail >= 0.0);
        }
    }

    #[test]
    fn doubling_n_increases_the_bound() {
        let s = Schedule::bounded_losses();
        for n in [1usize, 2, 5, 10, 40] {
            assert!(uniform_prior_bound(2 * n, &s, 1000).unwrap().total > uniform_prior_bound(n, &s, 1000).unwrap().total);
        }
    }

    #[test]
    fn bound_grows_sublinearly() {
        for s in [Schedule::bounded_losses(), Schedule::growing_losses()] {
            for horizon in [1_000u64, 4_000, 20_000] {
                let a = uniform_prior_bound(10, &s, horizon).unwrap().total;
                let b = uniform_prior_bound(10, &s, 2 * horizon).unwrap().total;
                assert!(b / a < 2.0, "{horizon}: {}", b / a);
            }
        }
    }

    #[test]
    fn reports_are_bitwise_reproducible() {
        let s = Schedule::growing_losses();
        assert_eq!(uniform_prior_bound(10, &s, 100_000).unwrap(), uniform_prior_bound(10, &s, 100_000).unwrap());
    }

    #[test]
    fn general_form_specializes_to_uniform() {
        // Powers of two make 1 / w* exact, so shared terms agree bit for bit.
        for n in [2usize, 4, 8, 16] {
            let f = ExpertFamily::uniform(n).unwrap();
            for s in [Schedule::bounded_losses(), Schedule::growing_losses()] {
                let t1 = uniform_prior_bound(n, &s, 3000).unwrap();
                let t2 = general_prior_bound(&f, &s, 3000, 0).unwrap();
                assert_eq!(t1.perturbation, t2.perturbation);
                assert_eq!(t1.exploration, t2.exploration);
                assert_eq!(t1.azuma_estimated, t2.azuma_estimated);
                assert_eq!(t1.azuma_realized, t2.azuma_realized);
                assert_eq!(t2.entry_cost, 0.0);
                // k + 1 versus ln n: the general form is larger by exactly 1 / eta_T.
                assert_relative_eq!(t2.complexity - t1.complexity, 1.0 / s.eta(3000).unwrap(), max_relative = 1e-12);
                assert!(t2.total >= t1.total);
            }
        }
        let f = ExpertFamily::uniform(10).unwrap();
        let s = Schedule::bounded_losses();
        let t1 = uniform_prior_bound(10, &s, 1000).unwrap();
        let t2 = general_prior_bound(&f, &s, 1000, 3).unwrap();
        assert_relative_eq!(t1.perturbation, t2.perturbation, max_relative = 1e-12);
        assert_relative_eq!(t1.azuma_estimated, t2.azuma_estimated, max_relative = 1e-12);
    }

    #[test]
    fn entry_cost_covers_rounds_before_entering() {
        use crate::family::{entering_time, Expert};
        let tau = entering_time(0.5, 16.0).unwrap();
        assert_eq!(tau, 65_536);
        let f = ExpertFamily::new(vec![
            Expert::new(0.5, 1, "first", ()).unwrap(),
            Expert::new(0.5, tau, "late", ()).unwrap(),
        ])
        .unwrap();
        let s = Schedule::entering_bounded();
        let full = general_prior_bound(&f, &s, 70_000, 1).unwrap();
        assert!(full.comparator_entered);
        let mut brute = CompensatedSum::default();
        for t in 1..tau {
            brute.add(1.0 / (s.gamma(t).unwrap() * 0.5));
        }
        assert_relative_eq!(full.entry_cost, brute.value(), max_relative = 1e-13);

        let early = general_prior_bound(&f, &s, 1000, 1).unwrap();
        assert!(!early.comparator_entered);
        assert_eq!(general_prior_bound(&f, &s, 1000, 0).unwrap().entry_cost, 0.0);
    }

    #[test]
    fn unit_delta_gives_sqrt_two_ln_four() {
        let f = ExpertFamily::from_weights(&[0.5, 0.25, 0.25], 2.0).unwrap();
        let r = general_prior_bound(&f, &Schedule::bounded_losses(), 1, 0).unwrap();
        assert_eq!(r.delta, 1.0);
        // B = gamma = 1, w* = 1/2 at t = 1.
        assert_relative_eq!(r.azuma_estimated, (2.0 * 4f64.ln()).sqrt() * 2.0, max_relative = 1e-15);
        assert_relative_eq!(r.azuma_realized, (2.0 * 4f64.ln()).sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn unknown_comparator_is_rejected() {
        let f = ExpertFamily::uniform(3).unwrap();
        assert_eq!(
            general_prior_bound(&f, &Schedule::bounded_losses(), 10, 3).unwrap_err(),
            FoeError::UnknownComparator { index: 3, len: 3 }
        );
    }
}
