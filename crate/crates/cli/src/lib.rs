//! Configuration and orchestration behind the `foe` command.

pub mod config;
pub mod experiment;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind};
pub use experiment::{run_experiment, ExperimentError, Summary};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const GATE_FAILURE: i32 = 1;
    pub const CONFIG_ERROR: i32 = 2;
}
