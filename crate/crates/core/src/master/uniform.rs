//! Follow or Explore for `n` experts with a uniform prior, written directly
//! from the uniform-case rules: explore uniformly, estimate `loss * n / gamma`,
//! and score every expert with complexity `ln n`.
//!
//! Kept separate from [`super::MasterState`] so the general loop can be checked
//! against it under shared seeds.

use rand::Rng;

use super::{draw_perturbations, perturbed_score, RoundRecord, RunError};
use crate::environments::Environment;
use crate::error::{FoeError, Result};
use crate::rng::{MasterStreams, RngContract};
use crate::schedule::Rates;

#[derive(Debug, Clone)]
pub struct UniformFoe<R> {
    n: usize,
    complexity: f64,
    rates: R,
    t: u64,
    cum_est: Vec<f64>,
    streams: MasterStreams,
    perturbations: Vec<f64>,
}

impl<R: Rates> UniformFoe<R> {
    pub fn new(n: usize, rates: R, rng: RngContract) -> Result<Self> {
        if n == 0 {
            return Err(FoeError::EmptyFamily);
        }
        Ok(Self {
            n,
            complexity: (n as f64).ln(),
            rates,
            t: 1,
            cum_est: vec![0.0; n],
            streams: MasterStreams::new(rng),
            perturbations: vec![0.0; n],
        })
    }

    pub fn cum_est_loss(&self) -> &[f64] {
        &self.cum_est
    }

    /// Returns `(chosen, explored, loss, estimate)`.
    pub fn step(&mut self, feedback: impl FnOnce(usize) -> f64) -> Result<(usize, bool, f64, f64)> {
        let t = self.t;
        let gamma = self.rates.gamma_at(t);
        let bound = self.rates.loss_bound_at(t);
        let explored = self.streams.explore_coin.random::<f64>() < gamma;
        let chosen = if explored {
            let u: f64 = self.streams.explore_choice.random();
            ((u * self.n as f64) as usize).min(self.n - 1)
        } else {
            draw_perturbations(&mut self.streams.perturbation, &mut self.perturbations);
            let eta = self.rates.eta_at(t);
            let mut best = 0;
            let mut best_score = f64::INFINITY;
            for i in 0..self.n {
                let s = perturbed_score(eta, self.cum_est[i], self.complexity, self.perturbations[i]);
                if !s.is_finite() {
                    return Err(FoeError::NonFiniteScore { round: t, expert: i });
                }
                if s < best_score {
                    best = i;
                    best_score = s;
                }
            }
            best
        };
        let loss = feedback(chosen);
        if !(0.0..=bound).contains(&loss) {
            return Err(FoeError::LossOutOfRange {
                round: t,
                expert: chosen,
                loss,
                bound,
            });
        }
        let estimate = if explored {
            let e = loss * self.n as f64 / gamma;
            self.cum_est[chosen] += e;
            e
        } else {
            0.0
        };
        self.t += 1;
        Ok((chosen, explored, loss, estimate))
    }
}

/// Runs the uniform-prior algorithm for `horizon` rounds.
pub fn run<R: Rates, E: Environment + ?Sized>(
    n: usize,
    rates: R,
    env: &mut E,
    horizon: u64,
    rng: RngContract,
) -> std::result::Result<Vec<RoundRecord>, RunError> {
    let mut records = Vec::new();
    let mut foe = match UniformFoe::new(n, rates, rng) {
        Ok(f) => f,
        Err(source) => return Err(RunError { partial: records, source }),
    };
    let mut losses = vec![0.0; n];
    let mut cumulative = 0.0;
    for t in 1..=horizon {
        let bound = foe.rates.loss_bound_at(t);
        let gamma = foe.rates.gamma_at(t);
        env.assign(t, bound, &mut losses);
        let (chosen, explored, loss, estimate) = match foe.step(|i| losses[i]) {
            Ok(o) => o,
            Err(source) => return Err(RunError { partial: records, source }),
        };
        env.reveal(t, chosen);
        cumulative += loss;
        records.push(RoundRecord {
            round: t,
            base_start: t,
            period_length: 1,
            chosen,
            explored,
            master_loss: loss,
            cumulative_master_loss: cumulative,
            estimate_applied: estimate,
            loss_bound: bound,
            estimate_cap: bound * n as f64 / gamma,
            losses: losses.clone(),
        });
    }
    Ok(records)
}
