//! Realized regret of a run against fixed experts.

use serde::Serialize;

use crate::error::{FoeError, Result};
use crate::master::RoundRecord;

/// Regret of one run after its last record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegretSummary {
    /// Master rounds in the trace.
    pub rounds: u64,
    /// Base rounds covered (equals `rounds` without a period wrapper).
    pub base_rounds: u64,
    pub master_loss: f64,
    pub comparator: usize,
    pub comparator_loss: f64,
    /// `master_loss - comparator_loss`.
    pub regret: f64,
    /// Expert with the smallest cumulative loss, lowest index on ties.
    pub best_expert: usize,
    pub best_expert_loss: f64,
    /// Regret against the best expert in hindsight.
    pub best_regret: f64,
    pub regret_per_round: f64,
    pub best_regret_per_round: f64,
}

/// Cumulative true loss of every expert over the trace.
pub fn expert_totals(records: &[RoundRecord]) -> Vec<f64> {
    let n = records.first().map_or(0, |r| r.losses.len());
    let mut totals = vec![0.0; n];
    for r in records {
        for (acc, l) in totals.iter_mut().zip(&r.losses) {
            *acc += l;
        }
    }
    totals
}

/// Index and value of the smallest entry, lowest index on ties.
pub fn argmin(values: &[f64]) -> Option<(usize, f64)> {
    values
        .iter()
        .copied()
        .enumerate()
        .fold(None, |best, (i, v)| match best {
            Some((_, b)) if b <= v => best,
            _ => Some((i, v)),
        })
}

pub fn regret(records: &[RoundRecord], comparator: usize) -> Result<RegretSummary> {
    let last = records.last().ok_or(FoeError::EmptyHorizon)?;
    let totals = expert_totals(records);
    if comparator >= totals.len() {
        return Err(FoeError::UnknownComparator {
            index: comparator,
            len: totals.len(),
        });
    }
    let base_rounds: u64 = records.iter().map(|r| r.period_length).sum();
    let master_loss = last.cumulative_master_loss;
    let (best_expert, best_expert_loss) = argmin(&totals).expect("nonempty family");
    let regret = master_loss - totals[comparator];
    let best_regret = master_loss - best_expert_loss;
    Ok(RegretSummary {
        rounds: records.len() as u64,
        base_rounds,
        master_loss,
        comparator,
        comparator_loss: totals[comparator],
        regret,
        best_expert,
        best_expert_loss,
        best_regret,
        regret_per_round: regret / base_rounds as f64,
        best_regret_per_round: best_regret / base_rounds as f64,
    })
}
