//! Follow or Explore: a bandit master over expert strategies with
//! exploration, perturbed-leader exploitation and experts that enter late.

pub mod analysis;
pub mod environments;
pub mod error;
pub mod family;
pub mod master;
pub mod par;
pub mod rng;
pub mod schedule;
pub mod timescale;

pub use error::{FoeError, Result};
pub use family::{Expert, ExpertFamily};
pub use master::{MasterState, RoundOutcome, RoundRecord, RunError};
pub use rng::{RngContract, Stream};
pub use schedule::{ConstantRates, Rates, Schedule};
