//! Regret, explicit bounds and statistical checks of the master.

pub mod bounds;
pub mod checks;
pub mod regret;
pub mod trend;

pub use bounds::{
    accumulate_records, bound_for_records, report_against, general_prior_bound, uniform_prior_bound,
    BoundAccumulator, BoundKind, BoundReport, CompensatedSum,
};
pub use checks::{
    bound_dominance, ifpl_paired_check, martingale_check, selection_law_check, unbiasedness_check,
    DominanceReport, IfplOracle, IfplReport, MartingaleReport, MeanEstimate, Moments,
    SelectionLawReport, UnbiasednessReport, DEFAULT_SLACK,
};
pub use regret::{argmin, expert_totals, regret, RegretSummary};
pub use trend::{hannan_trend, TrendPoint, TrendReport};
