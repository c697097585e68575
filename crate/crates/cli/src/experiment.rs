//! Runs a configured experiment and writes its trace tables and summary.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use foe::analysis::{
    argmin, bound_dominance, ifpl_paired_check, martingale_check, report_against,
    selection_law_check, unbiasedness_check, BoundAccumulator, IfplOracle,
};
use foe::environments::{oblivious_worst_case, GameBandit};
use foe::timescale::run_wrapped;
use foe::{master, ConstantRates, ExpertFamily, Rates, RoundRecord, RunError, Schedule};

use crate::config::{ConfigError, ExperimentConfig, ExperimentKind};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] foe::FoeError),
    #[error("writing {path}: {message}")]
    Output { path: PathBuf, message: String },
}

/// One row of a trace table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub round: u64,
    pub chosen_expert: usize,
    pub explored: bool,
    pub master_loss: f64,
    pub cumulative_master_loss: f64,
    pub best_expert_cum_loss: f64,
    pub regret: f64,
    pub bound_total: f64,
}

pub const TRACE_HEADER: [&str; 8] = [
    "round",
    "chosen_expert",
    "explored",
    "master_loss",
    "cumulative_master_loss",
    "best_expert_cum_loss",
    "regret",
    "bound_total",
];

/// 17 significant digits, enough to reload the exact double.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Trace rows with running best-expert loss and the bound against the expert
/// that is best so far.
pub fn trace_rows<S>(family: &ExpertFamily<S>, schedule: &Schedule, records: &[RoundRecord]) -> Vec<TraceRow> {
    let mut acc = if family.is_uniform() {
        BoundAccumulator::uniform(family.len())
    } else {
        BoundAccumulator::general()
    };
    let mut totals = vec![0.0; family.len()];
    let mut cumulative = 0.0;
    records
        .iter()
        .map(|r| {
            acc.push(
                r.loss_bound,
                schedule.gamma_at(r.round),
                schedule.eta_at(r.round),
                family.min_active_weight(r.round),
            );
            for (t, l) in totals.iter_mut().zip(&r.losses) {
                *t += l;
            }
            cumulative += r.master_loss;
            let (best, best_loss) = argmin(&totals).expect("nonempty family");
            TraceRow {
                round: r.round,
                chosen_expert: r.chosen,
                explored: r.explored,
                master_loss: r.master_loss,
                cumulative_master_loss: cumulative,
                best_expert_cum_loss: best_loss,
                regret: cumulative - best_loss,
                bound_total: report_against(&acc, family, schedule, best).total,
            }
        })
        .collect()
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<(), ExperimentError> {
    let out_err = |e: &dyn std::fmt::Display| ExperimentError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| out_err(&e))?;
    w.write_record(TRACE_HEADER).map_err(|e| out_err(&e))?;
    for r in rows {
        w.write_record([
            r.round.to_string(),
            r.chosen_expert.to_string(),
            u8::from(r.explored).to_string(),
            format_float(r.master_loss),
            format_float(r.cumulative_master_loss),
            format_float(r.best_expert_cum_loss),
            format_float(r.regret),
            format_float(r.bound_total),
        ])
        .map_err(|e| out_err(&e))?;
    }
    w.flush().map_err(|e| out_err(&e))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub rounds: u64,
    pub base_rounds: u64,
    pub master_loss: f64,
    pub loss_per_base_round: f64,
    pub best_expert: usize,
    pub best_expert_label: String,
    pub best_expert_loss: f64,
    pub regret: f64,
    pub regret_per_base_round: f64,
    pub bound_total: f64,
    pub bound_holds: bool,
    /// Trace file name inside the output directory.
    pub trace: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub kind: ExperimentKind,
    pub horizon: u64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_loss_per_base_round: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unwrapped_mean_loss_per_base_round: Option<f64>,
    pub gates: Vec<Gate>,
    pub runs: Vec<SeedSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub unwrapped_runs: Vec<SeedSummary>,
}

pub const SUMMARY_FILE: &str = "summary.toml";

fn seed_summary<S>(
    family: &ExpertFamily<S>,
    seed: u64,
    records: &[RoundRecord],
    rows: &[TraceRow],
    trace: String,
    error: Option<String>,
) -> SeedSummary {
    let base_rounds: u64 = records.iter().map(|r| r.period_length).sum();
    let totals = foe::analysis::expert_totals(records);
    let (best, best_loss) = argmin(&totals).unwrap_or((0, 0.0));
    let last = rows.last().copied();
    let master_loss = last.map_or(0.0, |r| r.cumulative_master_loss);
    let bound_total = last.map_or(0.0, |r| r.bound_total);
    let regret = master_loss - best_loss;
    let per_base = |x: f64| if base_rounds == 0 { 0.0 } else { x / base_rounds as f64 };
    SeedSummary {
        seed,
        rounds: records.len() as u64,
        base_rounds,
        master_loss,
        loss_per_base_round: per_base(master_loss),
        best_expert: best,
        best_expert_label: family.expert(best).label().to_string(),
        best_expert_loss: best_loss,
        regret,
        regret_per_base_round: per_base(regret),
        bound_total,
        bound_holds: regret <= bound_total,
        trace,
        error,
    }
}

/// Records of one seed, or the completed prefix and the error that stopped it.
type SeedRun = (u64, Vec<RoundRecord>, Option<String>);

fn collect(seed: u64, result: Result<Vec<RoundRecord>, RunError>) -> SeedRun {
    match result {
        Ok(r) => (seed, r, None),
        Err(e) => (seed, e.partial, Some(e.source.to_string())),
    }
}

fn emit_runs<S>(
    family: &ExpertFamily<S>,
    schedule: &Schedule,
    runs: Vec<SeedRun>,
    dir: &Path,
    prefix: &str,
) -> Result<Vec<SeedSummary>, ExperimentError> {
    let mut out = Vec::with_capacity(runs.len());
    for (seed, records, error) in runs {
        let rows = trace_rows(family, schedule, &records);
        let trace = format!("{prefix}seed{seed}.csv");
        write_trace(&dir.join(&trace), &rows)?;
        out.push(seed_summary(family, seed, &records, &rows, trace, error));
    }
    Ok(out)
}

fn run_gates(runs: &[SeedSummary], label: &str) -> Vec<Gate> {
    let failed: Vec<u64> = runs.iter().filter(|r| r.error.is_some()).map(|r| r.seed).collect();
    let violated: Vec<u64> = runs.iter().filter(|r| !r.bound_holds).map(|r| r.seed).collect();
    vec![
        Gate {
            name: format!("{label}runs_complete"),
            passed: failed.is_empty(),
            detail: format!("seeds stopped by contract violations: {failed:?}"),
        },
        Gate {
            name: format!("{label}bound_dominance"),
            passed: violated.is_empty(),
            detail: format!("seeds whose regret exceeds the bound: {violated:?}"),
        },
    ]
}

fn mean_loss(runs: &[SeedSummary]) -> f64 {
    runs.iter().map(|r| r.loss_per_base_round).sum::<f64>() / runs.len() as f64
}

/// Executes `config`, writes traces and the summary under its output path.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Summary, ExperimentError> {
    config.validate()?;
    let dir = &config.output;
    fs::create_dir_all(dir).map_err(|e| ExperimentError::Output {
        path: dir.clone(),
        message: e.to_string(),
    })?;
    let schedule = config.schedule.build()?;
    let seeds = &config.seeds;

    let summary = match config.kind {
        ExperimentKind::Oblivious | ExperimentKind::Adaptive => {
            let family = config.family.build_plain()?;
            let runs = foe::par::map_indexed(seeds.len(), |k| -> Result<SeedRun, ConfigError> {
                let seed = seeds[k];
                let mut env = config.environment.build_table(family.len(), seed)?;
                Ok(collect(seed, master::run(&family, schedule, &mut env, config.horizon, seed)))
            });
            let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
            let runs = emit_runs(&family, &schedule, runs, dir, "trace_")?;
            Summary {
                kind: config.kind,
                horizon: config.horizon,
                passed: false,
                mean_loss_per_base_round: Some(mean_loss(&runs)),
                unwrapped_mean_loss_per_base_round: None,
                gates: run_gates(&runs, ""),
                runs,
                unwrapped_runs: Vec::new(),
            }
        }
        ExperimentKind::PdWrapped => {
            let family = config.family.build_strategies()?;
            let game = config.environment.build_game()?;
            let runs = foe::par::map_indexed(seeds.len(), |k| {
                let seed = seeds[k];
                collect(seed, run_wrapped(&family, &schedule, &game, config.horizon, seed))
            });
            let runs = emit_runs(&family, &schedule, runs, dir, "trace_")?;
            let mean = mean_loss(&runs);
            let mut gates = run_gates(&runs, "");
            let mut unwrapped_runs = Vec::new();
            let mut unwrapped_mean = None;
            if config.environment.compare_unwrapped {
                let unit = schedule.with_period_exponent(0.0)?;
                let plain = foe::par::map_indexed(seeds.len(), |k| {
                    let seed = seeds[k];
                    let mut bandit = GameBandit::new(game.clone(), &family);
                    collect(seed, master::run(&family, unit, &mut bandit, config.horizon, seed))
                });
                unwrapped_runs = emit_runs(&family, &unit, plain, dir, "trace_unwrapped_")?;
                let m = mean_loss(&unwrapped_runs);
                gates.extend(run_gates(&unwrapped_runs, "unwrapped_"));
                gates.push(Gate {
                    name: "wrapped_beats_unwrapped".into(),
                    passed: m > mean,
                    detail: format!("per-base-round loss wrapped {mean:.6}, unwrapped {m:.6}"),
                });
                unwrapped_mean = Some(m);
            }
            Summary {
                kind: config.kind,
                horizon: config.horizon,
                passed: false,
                mean_loss_per_base_round: Some(mean),
                unwrapped_mean_loss_per_base_round: unwrapped_mean,
                gates,
                runs,
                unwrapped_runs,
            }
        }
        ExperimentKind::PropertySuite => Summary {
            kind: config.kind,
            horizon: config.horizon,
            passed: false,
            mean_loss_per_base_round: None,
            unwrapped_mean_loss_per_base_round: None,
            gates: property_suite(config, &schedule)?,
            runs: Vec::new(),
            unwrapped_runs: Vec::new(),
        },
    };
    let summary = Summary {
        passed: summary.gates.iter().all(|g| g.passed),
        ..summary
    };
    write_summary(&dir.join(SUMMARY_FILE), &summary)?;
    Ok(summary)
}

pub fn write_summary(path: &Path, summary: &Summary) -> Result<(), ExperimentError> {
    let text = toml::to_string(summary).map_err(|e| ExperimentError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    fs::write(path, text).map_err(|e| ExperimentError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Losses of the paired FPL/IFPL scenario: expert 0 alternates 1, 0, 1, ...
/// and expert 1 always loses 1/2.
pub fn ifpl_scenario(horizon: usize) -> Vec<Vec<f64>> {
    (0..horizon).map(|t| vec![((t + 1) % 2) as f64, 0.5]).collect()
}

fn property_suite(config: &ExperimentConfig, schedule: &Schedule) -> Result<Vec<Gate>, ExperimentError> {
    let c = &config.checks;
    let seed = config.seeds[0];
    let mut gates = Vec::new();

    let three = ExpertFamily::uniform(3)?;
    let rates = ConstantRates::new(0.5, 0.1, 1.0)?;
    let truth = [0.2, 0.5, 0.9];
    let u = unbiasedness_check(&three, &truth, &rates, 1, c.samples, seed, c.slack)?;
    gates.push(Gate {
        name: "unbiasedness".into(),
        passed: u.passed,
        detail: u
            .experts
            .iter()
            .map(|e| format!("{:.5}+-{:.5} vs {}", e.estimate.mean, e.estimate.std_error, e.truth))
            .collect::<Vec<_>>()
            .join("; "),
    });

    for &d in &c.selection_gaps {
        let s = selection_law_check(d, c.samples, seed, c.selection_tolerance)?;
        gates.push(Gate {
            name: format!("selection_law_gap_{d}"),
            passed: s.passed,
            detail: format!("frequency {:.6} vs {:.6}", s.frequency, s.expected),
        });
    }

    let two = ExpertFamily::uniform(2)?;
    let oracle = IfplOracle::new(&two, rates, ifpl_scenario(20))?;
    let i = ifpl_paired_check(&oracle, c.samples, seed, c.slack)?;
    let worst = i
        .rounds
        .iter()
        .map(|r| r.gap.mean - r.allowance)
        .fold(f64::NEG_INFINITY, f64::max);
    gates.push(Gate {
        name: "ifpl_paired".into(),
        passed: i.passed,
        detail: format!(
            "largest gap minus allowance {worst:.6}; lookahead worse in {} samples",
            i.ifpl_worse_count
        ),
    });

    let martingale_seeds: Vec<u64> = (0..c.martingale_runs).map(|k| seed.wrapping_add(k)).collect();
    let m = martingale_check(
        &three,
        schedule,
        |s| oblivious_worst_case(3, config.environment.gap, s),
        c.martingale_horizon,
        &martingale_seeds,
        c.slack,
    )?;
    gates.push(Gate {
        name: "martingale".into(),
        passed: m.passed,
        detail: m
            .experts
            .iter()
            .map(|e| format!("{:.4}+-{:.4}", e.estimate.mean, e.estimate.std_error))
            .collect::<Vec<_>>()
            .join("; "),
    });

    let ten = ExpertFamily::uniform(10)?;
    for &horizon in &c.dominance_horizons {
        let d = bound_dominance(
            &ten,
            schedule,
            |s| oblivious_worst_case(10, config.environment.gap, s),
            horizon,
            &config.seeds,
        )?;
        let tightest = d
            .seeds
            .iter()
            .map(|s| s.regret / s.bound)
            .fold(f64::NEG_INFINITY, f64::max);
        gates.push(Gate {
            name: format!("bound_dominance_T{horizon}"),
            passed: d.passed,
            detail: format!("{} violations; largest regret/bound {tightest:.4}", d.violations),
        });
    }
    Ok(gates)
}
