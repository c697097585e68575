use thiserror::Error;

/// Errors raised by schedules, families, the master loop and the environments.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FoeError {
    #[error("round index must be >= 1, got {0}")]
    InvalidRound(u64),

    #[error("schedule exponent `{name}` is invalid: {value}")]
    InvalidExponent { name: &'static str, value: f64 },

    #[error("prior weight must lie in (0, 1], got {0}")]
    InvalidWeight(f64),

    #[error("entering-time exponent must be positive and finite, got {0}")]
    InvalidAlpha(f64),

    #[error("prior weights sum to {0}, which exceeds 1")]
    WeightMassExceeded(f64),

    #[error("expert family is empty")]
    EmptyFamily,

    #[error("complexity of expert {index} is {complexity}, expected -ln(w) = {expected}")]
    ComplexityMismatch {
        index: usize,
        complexity: f64,
        expected: f64,
    },

    #[error("experts must be ordered by nondecreasing complexity (violated at index {0})")]
    UnorderedComplexity(usize),

    #[error("entering times must be nondecreasing along the family (violated at index {0})")]
    UnorderedEnteringTimes(usize),

    #[error("no expert is active at round 1 (first entering time is {0})")]
    NoInitialExpert(u64),

    #[error("round {round}: loss {loss} of expert {expert} lies outside [0, {bound}]")]
    LossOutOfRange {
        round: u64,
        expert: usize,
        loss: f64,
        bound: f64,
    },

    #[error("base-round loss {0} lies outside [0, 1]")]
    BaseLossOutOfRange(f64),

    #[error("round {round}: perturbed score of expert {expert} is not finite")]
    NonFiniteScore { round: u64, expert: usize },

    #[error("environment serves {environment} experts but the family has {family}")]
    ExpertCountMismatch { family: usize, environment: usize },

    #[error("horizon must be >= 1")]
    EmptyHorizon,

    #[error("planted gap must lie in [0, 0.5), got {0}")]
    InvalidGap(f64),

    #[error("need at least {min} experts, got {got}")]
    TooFewExperts { min: usize, got: usize },

    #[error("comparator index {index} is outside a family of {len} experts")]
    UnknownComparator { index: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, FoeError>;
