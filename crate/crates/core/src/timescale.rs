//! Period wrapper for responsive environments.
//!
//! Master round `t` hands control to the selected expert for `T~_t` consecutive
//! base rounds and feeds the summed base loss back as that round's loss, with
//! `B_t = T~_t`. Regret is measured on the base time scale against each
//! expert's counterfactual play-out from a clone of the initial environment.

use crate::environments::ResponsiveEnvironment;
use crate::error::{FoeError, Result};
use crate::family::ExpertFamily;
use crate::master::{MasterState, RoundRecord, RunError};
use crate::rng::RngContract;
use crate::schedule::Schedule;

/// `max(1, floor(t^p))`, the number of base rounds of master round `t`.
pub fn period_length(t: u64, schedule: &Schedule) -> Result<u64> {
    schedule.period_length(t)
}

/// Walks master rounds and the base rounds they cover, clamping the final
/// period to the base horizon.
#[derive(Debug, Clone)]
pub struct PeriodClock {
    schedule: Schedule,
    base_horizon: u64,
    master_round: u64,
    base_round: u64,
}

/// One period: master round, its first base round and its length.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Period {
    pub master_round: u64,
    pub base_start: u64,
    pub length: u64,
}

impl PeriodClock {
    pub fn new(schedule: Schedule, base_horizon: u64) -> Self {
        Self {
            schedule,
            base_horizon,
            master_round: 1,
            base_round: 1,
        }
    }
}

impl Iterator for PeriodClock {
    type Item = Period;

    fn next(&mut self) -> Option<Period> {
        if self.base_round > self.base_horizon {
            return None;
        }
        let remaining = self.base_horizon - self.base_round + 1;
        let length = self.schedule.period_length_at(self.master_round).min(remaining);
        let period = Period {
            master_round: self.master_round,
            base_start: self.base_round,
            length,
        };
        self.master_round += 1;
        self.base_round += length;
        Some(period)
    }
}

/// Lets `strategy` control `env` for `length` base rounds and returns the summed loss.
pub fn run_period<G: ResponsiveEnvironment>(
    strategy: &G::Strategy,
    env: &mut G,
    length: u64,
) -> Result<f64> {
    let mut total = 0.0;
    for _ in 0..length {
        let loss = env.play(strategy);
        if !(0.0..=1.0).contains(&loss) {
            return Err(FoeError::BaseLossOutOfRange(loss));
        }
        total += loss;
    }
    Ok(total)
}

/// Runs the period-wrapped master for `base_horizon` base rounds.
///
/// Each record is one master round; `losses[i]` is expert `i`'s counterfactual
/// loss over the same base rounds, obtained by letting `i` play every period
/// against its own clone of `env`.
pub fn run_wrapped<G: ResponsiveEnvironment>(
    family: &ExpertFamily<G::Strategy>,
    schedule: &Schedule,
    env: &G,
    base_horizon: u64,
    seed: u64,
) -> std::result::Result<Vec<RoundRecord>, RunError> {
    run_wrapped_with_contract(family, schedule, env, base_horizon, RngContract::new(seed))
}

pub fn run_wrapped_with_contract<G: ResponsiveEnvironment>(
    family: &ExpertFamily<G::Strategy>,
    schedule: &Schedule,
    env: &G,
    base_horizon: u64,
    rng: RngContract,
) -> std::result::Result<Vec<RoundRecord>, RunError> {
    let mut records = Vec::new();
    if base_horizon == 0 {
        return Err(RunError {
            partial: records,
            source: FoeError::EmptyHorizon,
        });
    }
    let n = family.len();
    let mut master = MasterState::new(family, *schedule, rng);
    let mut live = env.clone();
    let mut shadows = vec![env.clone(); n];
    let mut losses = vec![0.0; n];
    let mut cumulative = 0.0;

    for period in PeriodClock::new(*schedule, base_horizon) {
        for (i, shadow) in shadows.iter_mut().enumerate() {
            match run_period(family.expert(i).strategy(), shadow, period.length) {
                Ok(l) => losses[i] = l,
                Err(source) => return Err(RunError { partial: records, source }),
            }
        }

        let mut period_error = None;
        let step = master.step_with_bound(period.length as f64, |i| {
            run_period(family.expert(i).strategy(), &mut live, period.length).unwrap_or_else(|e| {
                period_error = Some(e);
                0.0
            })
        });
        let outcome = match (period_error, step) {
            (Some(source), _) | (None, Err(source)) => {
                return Err(RunError { partial: records, source })
            }
            (None, Ok(o)) => o,
        };

        cumulative += outcome.observed_loss;
        records.push(RoundRecord {
            round: period.master_round,
            base_start: period.base_start,
            period_length: period.length,
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
