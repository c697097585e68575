//! Experiment configuration, read from TOML with dotted section keys:
//!
//! ```toml
//! kind = "oblivious"
//! horizon = 10000
//! seeds = [1, 2, 3]
//! schedule.gamma_exponent = 0.25
//! schedule.eta_exponent = 0.5
//! family.kind = "uniform"
//! family.n = 10
//! environment.kind = "worst_case"
//! environment.gap = 0.1
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use foe::environments::{
    oblivious_worst_case, strategy_experts, AdaptiveEnvironment, AdaptiveRule, Environment,
    LossMatrix, MemoryOneStrategy, ObliviousEnvironment, Opponent, RepeatedGame, StrategyFamily,
};
use foe::{ExpertFamily, Schedule};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] toml::de::Error),
    #[error("`{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Oblivious,
    Adaptive,
    PdWrapped,
    PropertySuite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Master rounds, or base rounds for `pd_wrapped`.
    pub horizon: u64,
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub schedule: ScheduleSpec,
    #[serde(default)]
    pub family: FamilySpec,
    #[serde(default)]
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub checks: CheckSpec,
}

fn default_output() -> PathBuf {
    PathBuf::from("foe-out")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSpec {
    pub gamma_exponent: f64,
    pub eta_exponent: f64,
    pub loss_bound_exponent: f64,
    pub period_exponent: f64,
    pub confidence_exponent: f64,
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        let s = Schedule::bounded_losses();
        Self {
            gamma_exponent: s.gamma_exponent(),
            eta_exponent: s.eta_exponent(),
            loss_bound_exponent: s.loss_bound_exponent(),
            period_exponent: s.period_exponent(),
            confidence_exponent: s.confidence_exponent(),
        }
    }
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<Schedule, ConfigError> {
        Schedule::new(
            self.gamma_exponent,
            self.eta_exponent,
            self.loss_bound_exponent,
            self.period_exponent,
            self.confidence_exponent,
        )
        .map_err(|e| invalid("schedule", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Uniform,
    Weights,
    PdBasic,
    PdTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    /// Size of a uniform family.
    pub n: usize,
    /// Prior weights of a `weights` family.
    pub weights: Vec<f64>,
    /// Entering-time exponent for `weights` and `pd_table`.
    pub alpha: f64,
}

impl Default for FamilySpec {
    fn default() -> Self {
        Self {
            kind: FamilyKind::Uniform,
            n: 10,
            weights: Vec::new(),
            alpha: 8.0,
        }
    }
}

impl FamilySpec {
    pub fn is_strategic(&self) -> bool {
        matches!(self.kind, FamilyKind::PdBasic | FamilyKind::PdTable)
    }

    /// Family for loss-table environments.
    pub fn build_plain(&self) -> Result<ExpertFamily, ConfigError> {
        match self.kind {
            FamilyKind::Uniform => {
                ExpertFamily::uniform(self.n).map_err(|e| invalid("family.n", e.to_string()))
            }
            FamilyKind::Weights => ExpertFamily::from_weights(&self.weights, self.alpha)
                .map_err(|e| invalid("family.weights", e.to_string())),
            FamilyKind::PdBasic | FamilyKind::PdTable => Err(invalid(
                "family.kind",
                "strategy families need kind = \"pd_wrapped\"",
            )),
        }
    }

    pub fn build_strategies(&self) -> Result<ExpertFamily<MemoryOneStrategy>, ConfigError> {
        let kind = match self.kind {
            FamilyKind::PdBasic => StrategyFamily::PdBasic,
            FamilyKind::PdTable => StrategyFamily::PdTable { alpha: self.alpha },
            _ => {
                return Err(invalid(
                    "family.kind",
                    "pd_wrapped needs family.kind = \"pd_basic\" or \"pd_table\"",
                ))
            }
        };
        strategy_experts(kind).map_err(|e| invalid("family", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    WorstCase,
    Matrix,
    PunishFrequent,
    PunishLast,
    RepeatedGame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpponentKind {
    TitForTat,
    AlwaysCooperate,
    AlwaysDefect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvironmentSpec {
    pub kind: EnvironmentKind,
    /// Mean advantage of the planted expert, relative to `B_t`.
    pub gap: f64,
    /// Loss rows for `matrix`, cycled over rounds.
    pub rows: Vec<Vec<f64>>,
    pub opponent: OpponentKind,
    /// Stage-game losses `[cc, cd, dc, dd]` (own move first).
    pub losses: [f64; 4],
    /// Also run the same family with unit periods on per-base-round feedback.
    pub compare_unwrapped: bool,
}

impl Default for EnvironmentSpec {
    fn default() -> Self {
        let m = LossMatrix::prisoners_dilemma();
        Self {
            kind: EnvironmentKind::WorstCase,
            gap: 0.1,
            rows: Vec::new(),
            opponent: OpponentKind::TitForTat,
            losses: [m.cc, m.cd, m.dc, m.dd],
            compare_unwrapped: false,
        }
    }
}

impl EnvironmentSpec {
    pub fn build_table(&self, n: usize, seed: u64) -> Result<Box<dyn Environment + Send>, ConfigError> {
        Ok(match self.kind {
            EnvironmentKind::WorstCase => Box::new(
                oblivious_worst_case(n, self.gap, seed)
                    .map_err(|e| invalid("environment.gap", e.to_string()))?,
            ),
            EnvironmentKind::Matrix => {
                if self.rows.iter().any(|r| r.len() != n) {
                    return Err(invalid("environment.rows", format!("every row needs {n} entries")));
                }
                Box::new(
                    ObliviousEnvironment::from_matrix(self.rows.clone())
                        .map_err(|e| invalid("environment.rows", e.to_string()))?,
                )
            }
            EnvironmentKind::PunishFrequent | EnvironmentKind::PunishLast => {
                let rule = if self.kind == EnvironmentKind::PunishFrequent {
                    AdaptiveRule::PunishFrequent
                } else {
                    AdaptiveRule::PunishLast
                };
                Box::new(
                    AdaptiveEnvironment::new(n, rule)
                        .map_err(|e| invalid("environment.kind", e.to_string()))?,
                )
            }
            EnvironmentKind::RepeatedGame => {
                return Err(invalid(
                    "environment.kind",
                    "repeated_game needs kind = \"pd_wrapped\"",
                ))
            }
        })
    }

    pub fn build_game(&self) -> Result<RepeatedGame, ConfigError> {
        if self.kind != EnvironmentKind::RepeatedGame {
            return Err(invalid(
                "environment.kind",
                "pd_wrapped needs environment.kind = \"repeated_game\"",
            ));
        }
        let [cc, cd, dc, dd] = self.losses;
        let matrix =
            LossMatrix::new(cc, cd, dc, dd).map_err(|e| invalid("environment.losses", e.to_string()))?;
        let opponent = match self.opponent {
            OpponentKind::TitForTat => Opponent::TitForTat,
            OpponentKind::AlwaysCooperate => Opponent::AlwaysCooperate,
            OpponentKind::AlwaysDefect => Opponent::AlwaysDefect,
        };
        Ok(RepeatedGame::new(matrix, opponent))
    }
}

/// Sample sizes and gate width of the property suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckSpec {
    pub samples: u64,
    pub slack: f64,
    pub selection_gaps: Vec<f64>,
    pub selection_tolerance: f64,
    pub dominance_horizons: Vec<u64>,
    pub martingale_runs: u64,
    pub martingale_horizon: u64,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self {
            samples: 1_000_000,
            slack: foe::analysis::DEFAULT_SLACK,
            selection_gaps: vec![0.0, 0.5, 1.0, 2.0],
            selection_tolerance: 0.003,
            dominance_horizons: vec![1_000, 10_000],
            martingale_runs: 1_000,
            martingale_horizon: 1_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Replaces the seed list and output directory when the overrides are set.
    /// `seed` may hold a comma-separated list.
    pub fn apply_overrides(&mut self, seed: Option<&str>, output: Option<&Path>) -> Result<(), ConfigError> {
        if let Some(s) = seed {
            self.seeds = s
                .split(',')
                .map(|x| x.trim().parse::<u64>())
                .collect::<Result<_, _>>()
                .map_err(|e| invalid("seeds", format!("bad seed override {s:?}: {e}")))?;
        }
        if let Some(o) = output {
            self.output = o.to_path_buf();
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "seed list is empty"));
        }
        if self.horizon == 0 && self.kind != ExperimentKind::PropertySuite {
            return Err(invalid("horizon", "must be at least 1"));
        }
        self.schedule.build()?;
        match self.kind {
            ExperimentKind::Oblivious | ExperimentKind::Adaptive => {
                let family = self.family.build_plain()?;
                let adaptive = matches!(
                    self.environment.kind,
                    EnvironmentKind::PunishFrequent | EnvironmentKind::PunishLast
                );
                if adaptive != (self.kind == ExperimentKind::Adaptive) {
                    return Err(invalid(
                        "environment.kind",
                        format!("{:?} does not fit experiment kind {:?}", self.environment.kind, self.kind),
                    ));
                }
                self.environment.build_table(family.len(), 0)?;
            }
            ExperimentKind::PdWrapped => {
                self.family.build_strategies()?;
                self.environment.build_game()?;
            }
            ExperimentKind::PropertySuite => {
                let c = &self.checks;
                if c.samples == 0 {
                    return Err(invalid("checks.samples", "must be at least 1"));
                }
                if !(c.slack.is_finite() && c.slack > 0.0) {
                    return Err(invalid("checks.slack", "must be positive"));
                }
                if c.selection_gaps.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
                    return Err(invalid("checks.selection_gaps", "gaps must be finite and >= 0"));
                }
                if c.martingale_runs == 0 || c.martingale_horizon == 0 {
                    return Err(invalid("checks.martingale_runs", "runs and horizon must be positive"));
                }
                if c.dominance_horizons.contains(&0) {
                    return Err(invalid("checks.dominance_horizons", "horizons must be positive"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OBLIVIOUS: &str = r#"
kind = "oblivious"
horizon = 1000
seeds = [1, 2]
output = "out"
schedule.gamma_exponent = 0.25
schedule.eta_exponent = 0.5
family.kind = "uniform"
family.n = 10
environment.kind = "worst_case"
environment.gap = 0.1
"#;

    #[test]
    fn parses_dotted_keys() {
        let c = ExperimentConfig::from_toml(OBLIVIOUS).unwrap();
        assert_eq!(c.kind, ExperimentKind::Oblivious);
        assert_eq!(c.seeds, vec![1, 2]);
        assert_eq!(c.schedule.eta_exponent, 0.5);
        assert_eq!(c.schedule.confidence_exponent, 2.0);
        assert_eq!(c.family.n, 10);
    }

    #[test]
    fn round_trips() {
        let c = ExperimentConfig::from_toml(OBLIVIOUS).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = ExperimentConfig::from_toml(&format!("{OBLIVIOUS}schedule.gama_exponent = 0.3\n")).unwrap_err();
        assert!(err.to_string().contains("gama_exponent"), "{err}");
    }

    #[test]
    fn invalid_values_name_their_key() {
        let text = OBLIVIOUS.replace("seeds = [1, 2]", "seeds = []");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().starts_with("`seeds`"), "{err}");

        let text = OBLIVIOUS.replace("environment.gap = 0.1", "environment.gap = 0.7");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("environment.gap"), "{err}");

        let text = OBLIVIOUS.replace("schedule.eta_exponent = 0.5", "schedule.eta_exponent = -0.5");
        let err = ExperimentConfig::from_toml(&text).unwrap_err();
        assert!(err.to_string().contains("schedule"), "{err}");
    }

    #[test]
    fn mismatched_kinds_are_rejected() {
        let text = OBLIVIOUS.replace("kind = \"oblivious\"", "kind = \"pd_wrapped\"");
        assert!(ExperimentConfig::from_toml(&text).is_err());
        let text = OBLIVIOUS.replace("\"worst_case\"", "\"punish_last\"");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn overrides_replace_seeds_and_output() {
        let mut c = ExperimentConfig::from_toml(OBLIVIOUS).unwrap();
        c.apply_overrides(Some("7, 8,9"), Some(Path::new("/tmp/x"))).unwrap();
        assert_eq!(c.seeds, vec![7, 8, 9]);
        assert_eq!(c.output, PathBuf::from("/tmp/x"));
        assert!(c.apply_overrides(Some("seven"), None).is_err());
    }
}
