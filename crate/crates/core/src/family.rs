//! Expert families: prior weights, complexities `k = -ln w` and entering times.
//!
//! A family is ordered by nondecreasing complexity, so the experts active at
//! round `t` always form a prefix of the list.

use std::ops::Range;

use crate::error::{FoeError, Result};
use crate::schedule::Rates;

const MASS_TOLERANCE: f64 = 1e-9;
const COMPLEXITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Expert<S = ()> {
    weight: f64,
    complexity: f64,
    entering_time: u64,
    label: String,
    strategy: S,
}

impl<S> Expert<S> {
    /// Builds an expert whose complexity is `-ln weight`.
    pub fn new(weight: f64, entering_time: u64, label: impl Into<String>, strategy: S) -> Result<Self> {
        check_weight(weight)?;
        Ok(Self {
            weight,
            complexity: -weight.ln(),
            entering_time,
            label: label.into(),
            strategy,
        })
    }

    /// Rebuilds an expert from stored values; the family constructor checks
    /// that `complexity` matches the weight.
    pub fn with_complexity(
        weight: f64,
        complexity: f64,
        entering_time: u64,
        label: impl Into<String>,
        strategy: S,
    ) -> Result<Self> {
        check_weight(weight)?;
        Ok(Self {
            weight,
            complexity,
            entering_time,
            label: label.into(),
            strategy,
        })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn complexity(&self) -> f64 {
        self.complexity
    }

    pub fn entering_time(&self) -> u64 {
        self.entering_time
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn strategy(&self) -> &S {
        &self.strategy
    }
}

/// Ordered expert class with a (sub-)probability prior.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertFamily<S = ()> {
    experts: Vec<Expert<S>>,
}

impl ExpertFamily<()> {
    /// `n` experts with `w = 1/n`, `k = ln n` and `tau = 1`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::uniform_with((0..n).map(|i| (format!("expert-{i}"), ())).collect())
    }

    /// Experts from raw weights with entering times `ceil(w^-alpha)`.
    pub fn from_weights(weights: &[f64], alpha: f64) -> Result<Self> {
        Self::from_prior(
            weights
                .iter()
                .enumerate()
                .map(|(i, &w)| (w, format!("expert-{i}"), ()))
                .collect(),
            alpha,
        )
    }
}

impl<S> ExpertFamily<S> {
    /// Validates and wraps an explicit expert list.
    pub fn new(experts: Vec<Expert<S>>) -> Result<Self> {
        if experts.is_empty() {
            return Err(FoeError::EmptyFamily);
        }
        let mass: f64 = experts.iter().map(|e| e.weight).sum();
        if mass > 1.0 + MASS_TOLERANCE {
            return Err(FoeError::WeightMassExceeded(mass));
        }
        for (i, e) in experts.iter().enumerate() {
            let expected = -e.weight.ln();
            if (e.complexity - expected).abs() > COMPLEXITY_TOLERANCE * expected.abs().max(1.0) {
                return Err(FoeError::ComplexityMismatch {
                    index: i,
                    complexity: e.complexity,
                    expected,
                });
            }
        }
        for i in 1..experts.len() {
            if experts[i].complexity < experts[i - 1].complexity {
                return Err(FoeError::UnorderedComplexity(i));
            }
            if experts[i].entering_time < experts[i - 1].entering_time {
                return Err(FoeError::UnorderedEnteringTimes(i));
            }
        }
        if experts[0].entering_time != 1 {
            return Err(FoeError::NoInitialExpert(experts[0].entering_time));
        }
        Ok(Self { experts })
    }

    /// Uniform prior over the given strategies, all active from round 1.
    pub fn uniform_with(strategies: Vec<(String, S)>) -> Result<Self> {
        let n = strategies.len();
        if n == 0 {
            return Err(FoeError::EmptyFamily);
        }
        let w = 1.0 / n as f64;
        let experts = strategies
            .into_iter()
            .map(|(label, s)| Expert::new(w, 1, label, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(experts)
    }

    /// Non-uniform prior. Entries are sorted by decreasing weight (stable) and
    /// get entering times `ceil(w^-alpha)`; the lowest-complexity tier enters
    /// at round 1 so that the active set is never empty.
    pub fn from_prior(mut entries: Vec<(f64, String, S)>, alpha: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(FoeError::EmptyFamily);
        }
        entries.sort_by(|a, b| b.0.total_cmp(&a.0));
        let top = entries[0].0;
        let experts = entries
            .into_iter()
            .map(|(w, label, s)| {
                let tau = if w == top { 1 } else { entering_time(w, alpha)? };
                Expert::new(w, tau, label, s)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(experts)
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    pub fn experts(&self) -> &[Expert<S>] {
        &self.experts
    }

    pub fn expert(&self, i: usize) -> &Expert<S> {
        &self.experts[i]
    }

    pub fn weights(&self) -> impl Iterator<Item = f64> + '_ {
        self.experts.iter().map(|e| e.weight)
    }

    /// True when every expert has the same weight and enters at round 1.
    pub fn is_uniform(&self) -> bool {
        let w = self.experts[0].weight;
        self.experts
            .iter()
            .all(|e| e.weight == w && e.entering_time == 1)
    }

    /// Number of experts active at round `t`; they are the first entries.
    pub fn active_count(&self, t: u64) -> usize {
        self.experts
            .iter()
            .take_while(|e| e.entering_time <= t)
            .count()
    }

    /// Indices `{i : tau_i <= t}` as a prefix range.
    pub fn active_set(&self, t: u64) -> Range<usize> {
        0..self.active_count(t)
    }

    /// `w*_t`, the smallest weight among active experts.
    pub fn min_active_weight(&self, t: u64) -> f64 {
        self.min_weight_of_prefix(self.active_count(t).max(1))
    }

    pub(crate) fn min_weight_of_prefix(&self, active: usize) -> f64 {
        // Nondecreasing complexity means the last active entry is the lightest.
        self.experts[active - 1].weight
    }

    /// Exploration distribution `u_t`: the prior renormalized over active experts.
    pub fn exploration_distribution(&self, t: u64) -> Vec<f64> {
        let active = &self.experts[self.active_set(t)];
        let mass: f64 = active.iter().map(|e| e.weight).sum();
        active.iter().map(|e| e.weight / mass).collect()
    }

    /// `B^_t = B_t / (gamma_t * w*_t)`, the largest estimated loss that can be
    /// assigned at round `t`.
    pub fn estimated_loss_cap(&self, t: u64, rates: &impl Rates) -> f64 {
        estimated_loss_cap(
            rates.loss_bound_at(t),
            rates.gamma_at(t),
            self.min_active_weight(t),
        )
    }

    /// Same family with the strategies dropped.
    pub fn without_strategies(&self) -> ExpertFamily<()> {
        ExpertFamily {
            experts: self
                .experts
                .iter()
                .map(|e| Expert {
                    weight: e.weight,
                    complexity: e.complexity,
                    entering_time: e.entering_time,
                    label: e.label.clone(),
                    strategy: (),
                })
                .collect(),
        }
    }
}

/// Entering time `ceil(w^-alpha)`, saturating at `u64::MAX`.
pub fn entering_time(weight: f64, alpha: f64) -> Result<u64> {
    check_weight(weight)?;
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(FoeError::InvalidAlpha(alpha));
    }
    let x = weight.powf(-alpha);
    if x >= u64::MAX as f64 {
        return Ok(u64::MAX);
    }
    let nearest = x.round();
    let tau = if (x - nearest).abs() <= 1e-12 * nearest {
        nearest
    } else {
        x.ceil()
    };
    Ok((tau as u64).max(1))
}

pub fn estimated_loss_cap(loss_bound: f64, gamma: f64, min_active_weight: f64) -> f64 {
    loss_bound / (gamma * min_active_weight)
}

fn check_weight(weight: f64) -> Result<()> {
    if weight > 0.0 && weight <= 1.0 {
        Ok(())
    } else {
        Err(FoeError::InvalidWeight(weight))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::ConstantRates;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn family(weights: &[f64], taus: &[u64]) -> Result<ExpertFamily> {
        ExpertFamily::new(
            weights
                .iter()
                .zip(taus)
                .map(|(&w, &tau)| Expert::new(w, tau, "e", ()).unwrap())
                .collect(),
        )
    }

    #[test]
    fn entering_time_examples() {
        assert_eq!(entering_time(0.5, 16.0).unwrap(), 65_536);
        assert_eq!(entering_time(1.0, 16.0).unwrap(), 1);
        assert_eq!(entering_time(1.0, 3.5).unwrap(), 1);
        assert_eq!(entering_time(0.5, 8.0).unwrap(), 256);
        assert_eq!(entering_time(0.1, 8.0).unwrap(), 100_000_000);
        assert_eq!(entering_time(1e-300, 16.0).unwrap(), u64::MAX);
        assert!(entering_time(0.0, 8.0).is_err());
        assert!(entering_time(1.5, 8.0).is_err());
        assert!(entering_time(0.5, 0.0).is_err());
    }

    #[test]
    fn active_set_examples() {
        let f = family(&[0.5, 0.25, 0.25], &[1, 1, 1]).unwrap();
        assert_eq!(f.active_set(1), 0..3);

        // Both entries derived from alpha = 16 enter late: rejected.
        let late = family(&[0.5, 0.25], &[65_536, 4_294_967_296]);
        assert_eq!(late, Err(FoeError::NoInitialExpert(65_536)));

        let single = ExpertFamily::from_weights(&[1.0], 16.0).unwrap();
        assert_eq!(single.active_set(1), 0..1);
        assert_eq!(single.active_set(1_000_000), 0..1);
    }

    #[test]
    fn exploration_distribution_examples() {
        let f = family(&[0.5, 0.25, 0.25], &[1, 1, 1]).unwrap();
        assert_eq!(f.exploration_distribution(1), vec![0.5, 0.25, 0.25]);

        let f = family(&[0.5, 0.25, 0.25], &[1, 1, 10]).unwrap();
        let u = f.exploration_distribution(5);
        assert_eq!(u.len(), 2);
        assert_relative_eq!(u[0], 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(u[1], 1.0 / 3.0, max_relative = 1e-15);

        let f = ExpertFamily::uniform(4).unwrap();
        assert_eq!(f.exploration_distribution(1), vec![0.25; 4]);
    }

    #[test]
    fn estimated_loss_cap_examples() {
        assert_eq!(estimated_loss_cap(1.0, 0.5, 0.25), 8.0);
        let f = ExpertFamily::uniform(2).unwrap();
        assert_eq!(f.estimated_loss_cap(1, &ConstantRates::new(1.0, 1.0, 1.0).unwrap()), 2.0);
        // B = 2, gamma = 1/4, n = 10: general formula agrees with B n / gamma.
        let f = ExpertFamily::uniform(10).unwrap();
        let cap = f.estimated_loss_cap(1, &ConstantRates::new(0.25, 1.0, 2.0).unwrap());
        assert_relative_eq!(cap, 2.0 * 10.0 / 0.25, max_relative = 1e-15);
        assert_relative_eq!(cap, 80.0, max_relative = 1e-15);
    }

    #[test]
    fn uniform_family_shape() {
        let f = ExpertFamily::uniform(5).unwrap();
        assert!(f.is_uniform());
        for e in f.experts() {
            assert_eq!(e.weight(), 0.2);
            assert_relative_eq!(e.complexity(), 5f64.ln(), max_relative = 1e-15);
            assert_eq!(e.entering_time(), 1);
        }
    }

    #[test]
    fn from_prior_sorts_and_admits_the_top_tier() {
        let f = ExpertFamily::from_weights(&[0.0625, 0.5, 0.125, 0.25], 8.0).unwrap();
        let taus: Vec<u64> = f.experts().iter().map(|e| e.entering_time()).collect();
        assert_eq!(taus, vec![1, 65_536, 16_777_216, 4_294_967_296]);
        let ws: Vec<f64> = f.weights().collect();
        assert_eq!(ws, vec![0.5, 0.25, 0.125, 0.0625]);
        assert_eq!(f.active_set(256), 0..1);
        assert_eq!(f.active_set(65_535), 0..1);
        assert_eq!(f.active_set(65_536), 0..2);

        let tied = ExpertFamily::from_weights(&[0.25, 0.25, 0.125], 8.0).unwrap();
        let taus: Vec<u64> = tied.experts().iter().map(|e| e.entering_time()).collect();
        assert_eq!(taus, vec![1, 1, 16_777_216]);
    }

    #[test]
    fn validation_errors() {
        assert_eq!(ExpertFamily::<()>::new(vec![]), Err(FoeError::EmptyFamily));
        assert!(matches!(
            family(&[0.6, 0.6], &[1, 1]),
            Err(FoeError::WeightMassExceeded(_))
        ));
        assert_eq!(family(&[0.25, 0.5], &[1, 1]), Err(FoeError::UnorderedComplexity(1)));
        assert_eq!(family(&[0.5, 0.25], &[1, 1]).unwrap().len(), 2);
        assert!(matches!(
            ExpertFamily::new(vec![Expert::with_complexity(0.5, 0.5, 1, "x", ()).unwrap()]),
            Err(FoeError::ComplexityMismatch { .. })
        ));
        let stored = Expert::with_complexity(0.5, 2f64.ln(), 1, "x", ()).unwrap();
        assert!(ExpertFamily::new(vec![stored]).is_ok());
        assert!(Expert::new(0.0, 1, "x", ()).is_err());
        // Mass exactly one plus rounding slack is accepted.
        assert!(ExpertFamily::uniform(10).is_ok());
    }

    proptest! {
        #[test]
        fn exploration_distribution_sums_to_one(
            weights in proptest::collection::vec(1e-6f64..1.0, 1..12),
            t in 1u64..2_000_000,
        ) {
            let total: f64 = weights.iter().sum();
            let normalized: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let f = ExpertFamily::from_weights(&normalized, 8.0).unwrap();
            let u = f.exploration_distribution(t);
            prop_assert!((u.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn entering_time_is_antitone(a in 1e-3f64..1.0, b in 1e-3f64..1.0, alpha in 0.5f64..16.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(entering_time(lo, alpha).unwrap() >= entering_time(hi, alpha).unwrap());
        }

        #[test]
        fn active_set_grows(weights in proptest::collection::vec(1e-3f64..1.0, 1..10), t in 1u64..10_000_000) {
            let total: f64 = weights.iter().sum();
            let normalized: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let f = ExpertFamily::from_weights(&normalized, 4.0).unwrap();
            prop_assert!(f.active_count(t) <= f.active_count(t + 1));
            prop_assert!(f.active_count(t) >= 1);
        }

        #[test]
        fn uniform_cap_matches_closed_form(n in 1usize..64, gamma in 0.01f64..1.0, bound in 0.0f64..50.0) {
            let f = ExpertFamily::uniform(n).unwrap();
            let cap = f.estimated_loss_cap(1, &ConstantRates::new(gamma, 1.0, bound).unwrap());
            let closed = bound * n as f64 / gamma;
            prop_assert!((cap - closed).abs() <= 1e-12 * closed.max(1.0));
        }
    }
}
