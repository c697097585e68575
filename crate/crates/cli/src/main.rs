use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use foe::analysis::{general_prior_bound, uniform_prior_bound, BoundReport};
use foe::{ExpertFamily, Schedule};
use foe_cli::config::{CheckSpec, ExperimentConfig, ExperimentKind};
use foe_cli::{exit, run_experiment, ExperimentError, Summary};

#[derive(Parser)]
#[command(name = "foe", version, about = "Follow-or-Explore experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the statistical property suite.
    Check {
        /// Monte Carlo samples per check.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Seeds used for bound dominance.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the explicit regret bound for the given parameters.
    Bound(BoundArgs),
}

#[derive(Args)]
struct Overrides {
    /// Seed or comma-separated seed list replacing the configured seeds.
    #[arg(long, env = "FOE_SEED")]
    seed: Option<String>,
    /// Output directory.
    #[arg(long, env = "FOE_OUTPUT_DIR")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long)]
    horizon: u64,
    /// Uniform family size (ignored when weights are given).
    #[arg(long, default_value_t = 10)]
    experts: usize,
    /// Comma-separated prior weights.
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    #[arg(long, default_value_t = 8.0)]
    alpha: f64,
    /// Comparator index into the weight-sorted family.
    #[arg(long, default_value_t = 0)]
    comparator: usize,
    #[arg(long, default_value_t = 0.25)]
    gamma_exponent: f64,
    #[arg(long, default_value_t = 0.5)]
    eta_exponent: f64,
    #[arg(long, default_value_t = 0.0)]
    loss_bound_exponent: f64,
    #[arg(long, default_value_t = 2.0)]
    confidence_exponent: f64,
}

fn print_summary(summary: &Summary) {
    for g in &summary.gates {
        println!("{:<28} {}  {}", g.name, if g.passed { "PASS" } else { "FAIL" }, g.detail);
    }
    if let Some(m) = summary.mean_loss_per_base_round {
        println!("mean loss per base round: {m:.6}");
    }
    if let Some(m) = summary.unwrapped_mean_loss_per_base_round {
        println!("unwrapped mean loss per base round: {m:.6}");
    }
}

fn execute(config: &ExperimentConfig) -> ExitCode {
    match run_experiment(config) {
        Ok(summary) => {
            print_summary(&summary);
            println!("wrote {}", config.output.display());
            ExitCode::from(if summary.passed { exit::SUCCESS } else { exit::GATE_FAILURE } as u8)
        }
        Err(ExperimentError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(exit::CONFIG_ERROR as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::GATE_FAILURE as u8)
        }
    }
}

fn bound(args: &BoundArgs) -> anyhow::Result<BoundReport> {
    let schedule = Schedule::new(
        args.gamma_exponent,
        args.eta_exponent,
        args.loss_bound_exponent,
        0.0,
        args.confidence_exponent,
    )?;
    let report = if args.weights.is_empty() {
        uniform_prior_bound(args.experts, &schedule, args.horizon)?
    } else {
        let family = ExpertFamily::from_weights(&args.weights, args.alpha)?;
        general_prior_bound(&family, &schedule, args.horizon, args.comparator)?
    };
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, overrides } => {
            let loaded = ExperimentConfig::load(&config).and_then(|mut c| {
                c.apply_overrides(overrides.seed.as_deref(), overrides.output.as_deref())?;
                Ok(c)
            });
            match loaded {
                Ok(c) => execute(&c),
                Err(e) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(exit::CONFIG_ERROR as u8)
                }
            }
        }
        Command::Check {
            samples,
            seeds,
            overrides,
        } => {
            let mut config = ExperimentConfig {
                kind: ExperimentKind::PropertySuite,
                horizon: 0,
                seeds: (1..=seeds).collect(),
                output: PathBuf::from("foe-check"),
                schedule: Default::default(),
                family: Default::default(),
                environment: Default::default(),
                checks: CheckSpec {
                    samples,
                    ..CheckSpec::default()
                },
            };
            if let Err(e) = config.apply_overrides(overrides.seed.as_deref(), overrides.output.as_deref()) {
                eprintln!("config error: {e}");
                return ExitCode::from(exit::CONFIG_ERROR as u8);
            }
            execute(&config)
        }
        Command::Bound(args) => match bound(&args)
            .and_then(|r| toml::to_string(&r).context("serializing bound report"))
        {
            Ok(text) => {
                print!("{text}");
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(exit::CONFIG_ERROR as u8)
            }
        },
    }
}
