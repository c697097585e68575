//! Monte Carlo property checks of the master. Replicates are independent
//! seeded runs fanned out with [`crate::par`]; statistics are merged in chunk
//! order, so verdicts do not depend on the thread count.

use serde::Serialize;

use super::bounds::{accumulate_records, report_against};
use super::regret::regret;
use crate::environments::Environment;
use crate::error::{FoeError, Result};
use crate::family::ExpertFamily;
use crate::master::{self, draw_perturbations, perturbed_leader, perturbed_score, MasterState};
use crate::par::{map_chunks, map_indexed};
use crate::rng::{RngContract, Stream};
use crate::schedule::{ConstantRates, Rates, Schedule};

/// Default gate width in standard errors.
pub const DEFAULT_SLACK: f64 = 4.0;

const CHUNK: u64 = 4096;

/// Streaming mean and variance, mergeable across chunks.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn estimate(&self) -> MeanEstimate {
        let variance = if self.count > 1 {
            self.m2 / (self.count - 1) as f64
        } else {
            0.0
        };
        MeanEstimate {
            samples: self.count,
            mean: self.mean,
            std_error: (variance / self.count.max(1) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub samples: u64,
    pub mean: f64,
    pub std_error: f64,
}

impl MeanEstimate {
    /// True when `|mean - target| <= slack * std_error`. A zero standard
    /// error demands exact equality.
    pub fn within(&self, target: f64, slack: f64) -> bool {
        (self.mean - target).abs() <= slack * self.std_error
    }
}

fn merge_all(parts: Vec<Vec<Moments>>, width: usize) -> Vec<Moments> {
    let mut out = vec![Moments::default(); width];
    for part in parts {
        for (acc, m) in out.iter_mut().zip(&part) {
            acc.merge(m);
        }
    }
    out
}

/// One expert's estimate against its true value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpertEstimate {
    pub expert: usize,
    pub truth: f64,
    pub estimate: MeanEstimate,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnbiasednessReport {
    pub round: u64,
    pub slack: f64,
    pub experts: Vec<ExpertEstimate>,
    pub passed: bool,
}

/// Single-round replicates of the master at `round` with zero history: the
/// mean estimated loss of every active expert should match its true loss.
pub fn unbiasedness_check<S: Sync, R: Rates + Clone + Sync>(
    family: &ExpertFamily<S>,
    losses: &[f64],
    rates: &R,
    round: u64,
    samples: u64,
    seed: u64,
    slack: f64,
) -> Result<UnbiasednessReport> {
    if losses.len() != family.len() {
        return Err(FoeError::ExpertCountMismatch {
            family: family.len(),
            environment: losses.len(),
        });
    }
    crate::schedule::check_round(round)?;
    let active = family.active_count(round);
    let bound = rates.loss_bound_at(round);
    if let Some(&bad) = losses.iter().find(|l| !(0.0..=bound).contains(*l)) {
        return Err(FoeError::InvalidArgument(format!(
            "loss {bad} outside [0, {bound}]"
        )));
    }
    let parts = map_chunks(samples, CHUNK, |_, range| -> Result<Vec<Moments>> {
        let mut moments = vec![Moments::default(); active];
        let mut row = vec![0.0; active];
        for r in range {
            let rng = RngContract::replicate(seed, r);
            let mut state =
                MasterState::at_round(family, rates.clone(), rng, round, vec![0.0; active], 0.0)?;
            let outcome = state.step(|i| losses[i])?;
            row.fill(0.0);
            row[outcome.chosen] = outcome.estimate_applied;
            for (m, x) in moments.iter_mut().zip(&row) {
                m.push(*x);
            }
        }
        Ok(moments)
    });
    let moments = merge_all(parts.into_iter().collect::<Result<_>>()?, active);
    let experts: Vec<ExpertEstimate> = moments
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let estimate = m.estimate();
            ExpertEstimate {
                expert: i,
                truth: losses[i],
                estimate,
                passed: estimate.within(losses[i], slack),
            }
        })
        .collect();
    Ok(UnbiasednessReport {
        round,
        slack,
        passed: experts.iter().all(|e| e.passed),
        experts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleReport {
    pub horizon: u64,
    pub slack: f64,
    /// Mean of `l^_{1:T} - l_{1:T}` per expert active from round 1.
    pub experts: Vec<ExpertEstimate>,
    pub passed: bool,
}

/// Full runs over `seeds`: for each expert active from round 1 the
/// accumulated estimate minus the accumulated true loss has mean zero.
pub fn martingale_check<S, R, E, F>(
    family: &ExpertFamily<S>,
    rates: &R,
    make_env: F,
    horizon: u64,
    seeds: &[u64],
    slack: f64,
) -> Result<MartingaleReport>
where
    S: Sync,
    R: Rates + Clone + Sync,
    E: Environment,
    F: Fn(u64) -> Result<E> + Sync,
{
    let tracked = family.active_count(1);
    let runs = map_indexed(seeds.len(), |k| -> Result<Vec<f64>> {
        let mut env = make_env(seeds[k])?;
        let records = master::run(family, rates.clone(), &mut env, horizon, seeds[k])
            .map_err(|e| e.source)?;
        let mut deviation = vec![0.0; tracked];
        for r in &records {
            for (d, l) in deviation.iter_mut().zip(&r.losses) {
                *d -= l;
            }
            if r.explored {
                deviation[r.chosen] += r.estimate_applied;
            }
        }
        Ok(deviation)
    });
    let mut moments = vec![Moments::default(); tracked];
    for run in runs {
        for (m, d) in moments.iter_mut().zip(run?) {
            m.push(d);
        }
    }
    let experts: Vec<ExpertEstimate> = moments
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let estimate = m.estimate();
            ExpertEstimate {
                expert: i,
                truth: 0.0,
                estimate,
                passed: estimate.within(0.0, slack),
            }
        })
        .collect();
    Ok(MartingaleReport {
        horizon,
        slack,
        passed: experts.iter().all(|e| e.passed),
        experts,
    })
}

/// Paired FPL and one-step-lookahead ("infeasible") FPL on a fixed loss table.
///
/// Both selectors see the same perturbation draw each round; the lookahead
/// scores use the estimates including the current round.
#[derive(Debug, Clone)]
pub struct IfplOracle<'a, S> {
    family: &'a ExpertFamily<S>,
    rates: ConstantRates,
    losses: Vec<Vec<f64>>,
}

/// One paired sample of one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedRound {
    pub fpl: usize,
    pub ifpl: usize,
    /// `l^_t[fpl] - l^_t[ifpl]`.
    pub gap: f64,
    /// Lookahead choice scores no worse than the FPL choice on `l^_{1:t}`.
    pub ifpl_not_worse: bool,
    /// `gamma_t eta_t B^_t^2`.
    pub allowance: f64,
}

impl<'a, S> IfplOracle<'a, S> {
    /// `losses[t - 1][i]` is expert `i`'s loss in round `t`.
    pub fn new(family: &'a ExpertFamily<S>, rates: ConstantRates, losses: Vec<Vec<f64>>) -> Result<Self> {
        if losses.is_empty() {
            return Err(FoeError::EmptyHorizon);
        }
        for row in &losses {
            if row.len() != family.len() {
                return Err(FoeError::ExpertCountMismatch {
                    family: family.len(),
                    environment: row.len(),
                });
            }
        }
        Ok(Self { family, rates, losses })
    }

    pub fn horizon(&self) -> u64 {
        self.losses.len() as u64
    }

    /// One paired trajectory. The master's own streams drive exploration; the
    /// shared perturbations come from the oracle stream and are drawn every round.
    pub fn sample(&self, rng: RngContract) -> Result<Vec<PairedRound>> {
        let mut state = MasterState::new(self.family, self.rates, rng);
        let mut oracle = rng.stream(Stream::Oracle);
        let eta = self.rates.eta;
        let mut q = Vec::new();
        let mut out = Vec::with_capacity(self.losses.len());
        for (row, t) in self.losses.iter().zip(1u64..) {
            let before = state.cum_est_loss().to_vec();
            let active = before.len();
            q.resize(active, 0.0);
            draw_perturbations(&mut oracle, &mut q);
            let allowance = {
                let cap = self.family.estimated_loss_cap(t, &self.rates);
                self.rates.gamma * eta * cap * cap
            };
            let outcome = state.step(|i| row[i])?;
            let mut current = vec![0.0; active];
            current[outcome.chosen] = outcome.estimate_applied;
            let after: Vec<f64> = before.iter().zip(&current).map(|(a, b)| a + b).collect();

            let fpl = perturbed_leader(self.family, &before, eta, &q, t)?;
            let ifpl = perturbed_leader(self.family, &after, eta, &q, t)?;
            let score = |i: usize| perturbed_score(eta, after[i], self.family.expert(i).complexity(), q[i]);
            out.push(PairedRound {
                fpl,
                ifpl,
                gap: current[fpl] - current[ifpl],
                ifpl_not_worse: score(ifpl) <= score(fpl),
                allowance,
            });
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IfplRound {
    pub round: u64,
    pub gap: MeanEstimate,
    pub allowance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IfplReport {
    pub slack: f64,
    pub rounds: Vec<IfplRound>,
    /// Samples where the lookahead choice scored worse than FPL's; always zero.
    pub ifpl_worse_count: u64,
    pub passed: bool,
}

/// Per round, the mean of `l^_t[FPL] - l^_t[IFPL]` stays below
/// `gamma_t eta_t B^_t^2` plus `slack` standard errors.
pub fn ifpl_paired_check<S: Sync>(
    oracle: &IfplOracle<'_, S>,
    samples: u64,
    seed: u64,
    slack: f64,
) -> Result<IfplReport> {
    let horizon = oracle.horizon() as usize;
    let parts = map_chunks(samples, CHUNK, |_, range| -> Result<(Vec<Moments>, u64, Vec<f64>)> {
        let mut moments = vec![Moments::default(); horizon];
        let mut worse = 0;
        let mut allowances = vec![0.0; horizon];
        for r in range {
            for (k, p) in oracle.sample(RngContract::replicate(seed, r))?.iter().enumerate() {
                moments[k].push(p.gap);
                worse += u64::from(!p.ifpl_not_worse);
                allowances[k] = p.allowance;
            }
        }
        Ok((moments, worse, allowances))
    });
    let mut merged = vec![Moments::default(); horizon];
    let mut worse = 0;
    let mut allowances = vec![0.0; horizon];
    for part in parts {
        let (m, w, a) = part?;
        for (acc, x) in merged.iter_mut().zip(&m) {
            acc.merge(x);
        }
        worse += w;
        allowances = a;
    }
    let rounds: Vec<IfplRound> = merged
        .iter()
        .zip(&allowances)
        .enumerate()
        .map(|(k, (m, &allowance))| {
            let gap = m.estimate();
            IfplRound {
                round: k as u64 + 1,
                gap,
                allowance,
                passed: gap.mean <= allowance + slack * gap.std_error,
            }
        })
        .collect();
    Ok(IfplReport {
        slack,
        passed: worse == 0 && rounds.iter().all(|r| r.passed),
        ifpl_worse_count: worse,
        rounds,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionLawReport {
    /// Score gap `d` of the worse expert.
    pub gap: f64,
    pub samples: u64,
    /// Fraction of draws selecting the worse expert.
    pub frequency: f64,
    /// `exp(-d) / 2`.
    pub expected: f64,
    pub abs_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Two experts whose unperturbed scores differ by `gap >= 0`: the worse one is
/// picked with probability `exp(-gap) / 2`.
pub fn selection_law_check(gap: f64, samples: u64, seed: u64, tolerance: f64) -> Result<SelectionLawReport> {
    if !(gap.is_finite() && gap >= 0.0) {
        return Err(FoeError::InvalidArgument(format!("score gap {gap} must be finite and >= 0")));
    }
    let family = ExpertFamily::uniform(2)?;
    let rates = ConstantRates::new(1.0, 1.0, 1.0)?;
    let counts = map_chunks(samples, CHUNK, |c, range| -> Result<u64> {
        let mut state = MasterState::at_round(
            &family,
            rates,
            RngContract::replicate(seed, c),
            1,
            vec![gap, 0.0],
            0.0,
        )?;
        let mut worse = 0;
        for _ in range {
            worse += u64::from(state.fpl_select()? == 0);
        }
        Ok(worse)
    });
    let worse: u64 = counts.into_iter().sum::<Result<u64>>()?;
    let frequency = worse as f64 / samples.max(1) as f64;
    let expected = (-gap).exp() / 2.0;
    let abs_error = (frequency - expected).abs();
    Ok(SelectionLawReport {
        gap,
        samples,
        frequency,
        expected,
        abs_error,
        tolerance,
        passed: abs_error <= tolerance,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedDominance {
    pub seed: u64,
    /// Comparator with the smallest `bound - regret`.
    pub tightest_comparator: usize,
    pub regret: f64,
    pub bound: f64,
    /// Number of comparators whose regret exceeded their bound.
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub horizon: u64,
    pub seeds: Vec<SeedDominance>,
    pub violations: usize,
    pub passed: bool,
}

/// Runs the master once per seed and compares the realized regret against
/// every comparator with that comparator's explicit bound.
pub fn bound_dominance<S, E, F>(
    family: &ExpertFamily<S>,
    schedule: &Schedule,
    make_env: F,
    horizon: u64,
    seeds: &[u64],
) -> Result<DominanceReport>
where
    S: Sync,
    E: Environment,
    F: Fn(u64) -> Result<E> + Sync,
{
    let per_seed = map_indexed(seeds.len(), |k| -> Result<SeedDominance> {
        let seed = seeds[k];
        let mut env = make_env(seed)?;
        let records = master::run(family, *schedule, &mut env, horizon, seed).map_err(|e| e.source)?;
        let acc = accumulate_records(family, schedule, &records);
        let mut tightest: Option<(usize, f64, f64)> = None;
        let mut violations = 0;
        for i in 0..family.len() {
            let r = regret(&records, i)?.regret;
            let b = report_against(&acc, family, schedule, i).total;
            violations += usize::from(r > b);
            if tightest.is_none_or(|(_, tr, tb)| b - r < tb - tr) {
                tightest = Some((i, r, b));
            }
        }
        let (i, r, b) = tightest.expect("nonempty family");
        Ok(SeedDominance {
            seed,
            tightest_comparator: i,
            regret: r,
            bound: b,
            violations,
        })
    });
    let seeds = per_seed.into_iter().collect::<Result<Vec<_>>>()?;
    let violations = seeds.iter().map(|s| s.violations).sum();
    Ok(DominanceReport {
        horizon,
        seeds,
        violations,
        passed: violations == 0,
    })
}
