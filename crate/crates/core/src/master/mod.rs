//! Follow or Explore with entering experts, and its follow-the-perturbed-leader
//! selector.
//!
//! Each round the master flips an exploration coin with bias `gamma_t`. On an
//! exploration round it samples an active expert from the renormalized prior
//! `u_t` and charges that expert the importance-weighted loss
//! `loss / (u_t^I * gamma_t)`; otherwise it follows the perturbed leader over
//! the active experts and charges nothing. Experts that have not entered yet
//! are charged the cap `B^_t` every round, which is kept as one running sum and
//! handed to each expert when it enters.

pub mod uniform;

use rand::distr::Open01;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::environments::Environment;
use crate::error::{FoeError, Result};
use crate::family::{estimated_loss_cap, ExpertFamily};
use crate::rng::{MasterStreams, RngContract};
use crate::schedule::Rates;

/// What happened in one master round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutcome {
    pub round: u64,
    /// Expert `I_t` that was played.
    pub chosen: usize,
    /// Exploration flag `r_t`.
    pub explored: bool,
    /// True loss of the chosen expert, the only loss revealed.
    pub observed_loss: f64,
    /// Amount added to the chosen expert's cumulative estimate.
    pub estimate_applied: f64,
    /// `B_t` in force this round.
    pub loss_bound: f64,
    /// `B^_t` in force this round.
    pub estimate_cap: f64,
}

/// One row of a run trace.
///
/// `losses` is the full true loss vector of the round. It comes from the
/// environment's analysis side channel and is never shown to the master.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: u64,
    /// First base round covered by this master round (equals `round` without a period wrapper).
    pub base_start: u64,
    /// Number of base rounds covered.
    pub period_length: u64,
    pub chosen: usize,
    pub explored: bool,
    pub master_loss: f64,
    pub cumulative_master_loss: f64,
    pub estimate_applied: f64,
    pub loss_bound: f64,
    pub estimate_cap: f64,
    pub losses: Vec<f64>,
}

/// A run that stopped early; `partial` holds every completed round.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("run aborted after {} rounds: {source}", partial.len())]
pub struct RunError {
    pub partial: Vec<RoundRecord>,
    #[source]
    pub source: FoeError,
}

/// Perturbed score `eta * cumulative + complexity - q`.
#[inline]
pub fn perturbed_score(eta: f64, cumulative: f64, complexity: f64, q: f64) -> f64 {
    eta * cumulative + complexity - q
}

/// Argmin of the perturbed scores over the first `cumulative.len()` experts,
/// ties going to the lowest index.
pub fn perturbed_leader<S>(
    family: &ExpertFamily<S>,
    cumulative: &[f64],
    eta: f64,
    perturbations: &[f64],
    round: u64,
) -> Result<usize> {
    debug_assert_eq!(cumulative.len(), perturbations.len());
    let mut best = 0;
    let mut best_score = f64::INFINITY;
    for (i, (c, q)) in cumulative.iter().zip(perturbations).enumerate() {
        let score = perturbed_score(eta, *c, family.expert(i).complexity(), *q);
        if !score.is_finite() {
            return Err(FoeError::NonFiniteScore { round, expert: i });
        }
        if score < best_score {
            best = i;
            best_score = score;
        }
    }
    Ok(best)
}

/// Unit-rate exponential draw by inversion, `-ln U` with `U` in `(0, 1)`.
#[inline]
pub fn exponential(rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.sample(Open01);
    -u.ln()
}

/// Fills `out` with fresh unit exponentials.
pub fn draw_perturbations(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    for q in out.iter_mut() {
        *q = exponential(rng);
    }
}

/// State of one FoE run.
#[derive(Debug, Clone)]
pub struct MasterState<'a, S, R> {
    family: &'a ExpertFamily<S>,
    rates: R,
    t: u64,
    cum_est: Vec<f64>,
    inactive_sum: f64,
    streams: MasterStreams,
    perturbations: Vec<f64>,
}

impl<'a, S, R: Rates> MasterState<'a, S, R> {
    pub fn new(family: &'a ExpertFamily<S>, rates: R, rng: RngContract) -> Self {
        let active = family.active_count(1);
        Self {
            family,
            rates,
            t: 1,
            cum_est: vec![0.0; active],
            inactive_sum: 0.0,
            streams: MasterStreams::new(rng),
            perturbations: Vec::with_capacity(active),
        }
    }

    /// State positioned at round `t` with the given cumulative estimates for
    /// the experts active at `t`. Experts entering later will be initialized
    /// from `inactive_sum`.
    pub fn at_round(
        family: &'a ExpertFamily<S>,
        rates: R,
        rng: RngContract,
        t: u64,
        cum_est: Vec<f64>,
        inactive_sum: f64,
    ) -> Result<Self> {
        crate::schedule::check_round(t)?;
        let active = family.active_count(t);
        if cum_est.len() != active {
            return Err(FoeError::InvalidArgument(format!(
                "{} cumulative estimates given for {active} active experts",
                cum_est.len()
            )));
        }
        Ok(Self {
            family,
            rates,
            t,
            cum_est,
            inactive_sum,
            streams: MasterStreams::new(rng),
            perturbations: Vec::with_capacity(active),
        })
    }

    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn family(&self) -> &'a ExpertFamily<S> {
        self.family
    }

    pub fn rates(&self) -> &R {
        &self.rates
    }

    /// Cumulative estimated losses `l^_{<t}` of the active experts.
    pub fn cum_est_loss(&self) -> &[f64] {
        &self.cum_est
    }

    /// `sum_{s<t} B^_s`, the estimate carried by experts that have not entered.
    pub fn inactive_sum(&self) -> f64 {
        self.inactive_sum
    }

    pub fn active_count(&self) -> usize {
        self.cum_est.len()
    }

    /// Draws fresh perturbations and returns the perturbed leader.
    pub fn fpl_select(&mut self) -> Result<usize> {
        let active = self.cum_est.len();
        self.perturbations.resize(active, 0.0);
        draw_perturbations(&mut self.streams.perturbation, &mut self.perturbations);
        perturbed_leader(
            self.family,
            &self.cum_est,
            self.rates.eta_at(self.t),
            &self.perturbations,
            self.t,
        )
    }

    /// One round with the schedule's own loss bound `B_t`.
    pub fn step(&mut self, feedback: impl FnOnce(usize) -> f64) -> Result<RoundOutcome> {
        let bound = self.rates.loss_bound_at(self.t);
        self.step_with_bound(bound, feedback)
    }

    /// One round with an explicit loss bound. `feedback` is asked for the true
    /// loss of the played expert and nothing else.
    pub fn step_with_bound(
        &mut self,
        loss_bound: f64,
        feedback: impl FnOnce(usize) -> f64,
    ) -> Result<RoundOutcome> {
        let t = self.t;
        let active = self.cum_est.len();
        let gamma = self.rates.gamma_at(t);
        let cap = estimated_loss_cap(loss_bound, gamma, self.family.min_weight_of_prefix(active));

        let explored = self.streams.explore_coin.random::<f64>() < gamma;
        let (chosen, probability) = if explored {
            self.sample_exploration(active)
        } else {
            (self.fpl_select()?, 1.0)
        };

        let observed_loss = feedback(chosen);
        if !(0.0..=loss_bound).contains(&observed_loss) {
            return Err(FoeError::LossOutOfRange {
                round: t,
                expert: chosen,
                loss: observed_loss,
                bound: loss_bound,
            });
        }

        let estimate_applied = if explored {
            let estimate = observed_loss / (probability * gamma);
            self.cum_est[chosen] += estimate;
            estimate
        } else {
            0.0
        };

        self.inactive_sum += cap;
        self.t += 1;
        let entered = self.family.active_count(self.t);
        self.cum_est.resize(entered, self.inactive_sum);

        Ok(RoundOutcome {
            round: t,
            chosen,
            explored,
            observed_loss,
            estimate_applied,
            loss_bound,
            estimate_cap: cap,
        })
    }

    /// Draws from `u_t` by inversion; returns the index and its probability.
    fn sample_exploration(&mut self, active: usize) -> (usize, f64) {
        let experts = &self.family.experts()[..active];
        let mass: f64 = experts.iter().map(|e| e.weight()).sum();
        let target = self.streams.explore_choice.random::<f64>() * mass;
        let mut acc = 0.0;
        let mut chosen = active - 1;
        for (i, e) in experts.iter().enumerate() {
            acc += e.weight();
            if target < acc {
                chosen = i;
                break;
            }
        }
        (chosen, experts[chosen].weight() / mass)
    }
}

/// Runs FoE for `horizon` rounds against `env`.
pub fn run<S, R: Rates, E: Environment + ?Sized>(
    family: &ExpertFamily<S>,
    rates: R,
    env: &mut E,
    horizon: u64,
    seed: u64,
) -> std::result::Result<Vec<RoundRecord>, RunError> {
    run_with_contract(family, rates, env, horizon, RngContract::new(seed))
}

pub fn run_with_contract<S, R: Rates, E: Environment + ?Sized>(
    family: &ExpertFamily<S>,
    rates: R,
    env: &mut E,
    horizon: u64,
    rng: RngContract,
) -> std::result::Result<Vec<RoundRecord>, RunError> {
    let mut records = Vec::with_capacity(horizon.min(1 << 20) as usize);
    let fail = |partial, source| Err(RunError { partial, source });
    if horizon == 0 {
        return fail(records, FoeError::EmptyHorizon);
    }
    if env.num_experts() != family.len() {
        return fail(
            records,
            FoeError::ExpertCountMismatch {
                family: family.len(),
                environment: env.num_experts(),
            },
        );
    }

    let mut master = MasterState::new(family, rates, rng);
    let mut losses = vec![0.0; family.len()];
    let mut cumulative = 0.0;
    for t in 1..=horizon {
        let bound = master.rates().loss_bound_at(t);
        env.assign(t, bound, &mut losses);
        let outcome = match master.step_with_bound(bound, |i| losses[i]) {
            Ok(o) => o,
            Err(e) => return fail(records, e),
        };
        env.reveal(t, outcome.chosen);
        cumulative += outcome.observed_loss;
        records.push(RoundRecord {
            round: t,
            base_start: t,
            period_length: 1,
            chosen: outcome.chosen,
            explored: outcome.explored,
            master_loss: outcome.observed_loss,
            cumulative_master_loss: cumulative,
            estimate_applied: outcome.estimate_applied,
            loss_bound: outcome.loss_bound,
            estimate_cap: outcome.estimate_cap,
            losses: losses.clone(),
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environments::oblivious::ObliviousEnvironment;
    use crate::family::Expert;
    use crate::schedule::{ConstantRates, Schedule};
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn perturbed_leader_breaks_ties_low() {
        let f = ExpertFamily::uniform(3).unwrap();
        let i = perturbed_leader(&f, &[1.0, 1.0, 1.0], 0.5, &[0.3, 0.3, 0.3], 1).unwrap();
        assert_eq!(i, 0);
        let i = perturbed_leader(&f, &[1.0, 0.0, 1.0], 0.5, &[0.3, 0.3, 0.3], 1).unwrap();
        assert_eq!(i, 1);
    }

    #[test]
    fn perturbed_leader_rejects_overflow() {
        let f = ExpertFamily::uniform(2).unwrap();
        let err = perturbed_leader(&f, &[f64::MAX, 0.0], 4.0, &[0.1, 0.1], 9).unwrap_err();
        assert_eq!(err, FoeError::NonFiniteScore { round: 9, expert: 0 });
    }

    #[test]
    fn exponential_draws_are_finite_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mean = (0..200_000)
            .map(|_| {
                let q = exponential(&mut rng);
                assert!(q.is_finite() && q > 0.0);
                q
            })
            .sum::<f64>()
            / 200_000.0;
        assert!((mean - 1.0).abs() < 0.01);
    }

    #[test]
    fn exploration_estimate_matches_uniform_formula() {
        // uniform n = 4, gamma = 1/2, loss 0.6 -> 0.6 * 4 / 0.5 = 4.8
        let f = ExpertFamily::uniform(4).unwrap();
        let rates = ConstantRates::new(0.5, 0.5, 1.0).unwrap();
        let mut seen = false;
        for seed in 0..64 {
            let mut m = MasterState::new(&f, rates, RngContract::new(seed));
            let out = m.step(|_| 0.6).unwrap();
            if out.explored {
                assert_relative_eq!(out.estimate_applied, 4.8, max_relative = 1e-15);
                assert_eq!(m.cum_est_loss()[out.chosen], out.estimate_applied);
                seen = true;
            } else {
                assert_eq!(out.estimate_applied, 0.0);
                assert!(m.cum_est_loss().iter().all(|&c| c == 0.0));
            }
        }
        assert!(seen);
    }

    #[test]
    fn first_round_always_explores_under_power_schedule() {
        let f = ExpertFamily::uniform(3).unwrap();
        for seed in 0..100 {
            let mut m = MasterState::new(&f, Schedule::bounded_losses(), RngContract::new(seed));
            assert!(m.step(|_| 0.5).unwrap().explored);
        }
    }

    #[test]
    fn loss_outside_bound_aborts() {
        let f = ExpertFamily::uniform(2).unwrap();
        let mut m = MasterState::new(&f, Schedule::bounded_losses(), RngContract::new(0));
        assert!(matches!(m.step(|_| 1.5), Err(FoeError::LossOutOfRange { .. })));
        let mut m = MasterState::new(&f, Schedule::bounded_losses(), RngContract::new(0));
        assert!(matches!(m.step(|_| -0.1), Err(FoeError::LossOutOfRange { .. })));
    }

    #[test]
    fn entering_experts_start_from_the_pessimistic_prefix() {
        let experts = vec![
            Expert::new(0.5, 1, "a", ()).unwrap(),
            Expert::new(0.25, 4, "b", ()).unwrap(),
            Expert::new(0.125, 9, "c", ()).unwrap(),
        ];
        let f = ExpertFamily::new(experts).unwrap();
        let rates = ConstantRates::new(0.5, 0.3, 1.0).unwrap();
        let mut m = MasterState::new(&f, rates, RngContract::new(11));
        let mut caps = Vec::new();
        for t in 1..=20u64 {
            assert_eq!(m.active_count(), f.active_count(t));
            let out = m.step(|_| 1.0).unwrap();
            assert!(out.estimate_applied <= out.estimate_cap);
            caps.push(out.estimate_cap);
            let prefix: f64 = caps.iter().sum();
            assert_relative_eq!(m.inactive_sum(), prefix, max_relative = 1e-12);
            for (i, &c) in m.cum_est_loss().iter().enumerate() {
                assert!(c >= 0.0 && c <= prefix * (1.0 + 1e-12));
                let tau = f.expert(i).entering_time();
                if tau > 1 {
                    let entry: f64 = caps[..(tau - 1) as usize].iter().sum();
                    assert!(c >= entry * (1.0 - 1e-12));
                }
            }
        }
        // Cap while only `a` is active: 1 / (0.5 * 0.5).
        assert_eq!(caps[0], 4.0);
        // Cap once `b` entered: 1 / (0.5 * 0.25).
        assert_eq!(caps[4], 8.0);
        assert_eq!(caps[10], 16.0);
    }

    #[test]
    fn run_single_expert_collects_its_loss() {
        let f = ExpertFamily::uniform(1).unwrap();
        let mut env = ObliviousEnvironment::from_matrix(vec![vec![0.37]]).unwrap();
        let rec = run(&f, Schedule::bounded_losses(), &mut env, 1, 5).unwrap();
        assert_eq!(rec.len(), 1);
        assert_eq!(rec[0].cumulative_master_loss, 0.37);
        assert_eq!(rec[0].losses, vec![0.37]);
    }

    #[test]
    fn run_preserves_partial_trace() {
        let f = ExpertFamily::uniform(2).unwrap();
        let mut rows = vec![vec![0.5, 0.5]; 3];
        rows.push(vec![2.0, 2.0]);
        let mut env = ObliviousEnvironment::from_matrix(rows).unwrap();
        let err = run(&f, Schedule::bounded_losses(), &mut env, 4, 1).unwrap_err();
        assert_eq!(err.partial.len(), 3);
        assert!(matches!(err.source, FoeError::LossOutOfRange { round: 4, .. }));
    }
}
