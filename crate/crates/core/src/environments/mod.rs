//! Adversaries and games the master plays against.
//!
//! [`Environment`] is the master-facing protocol: before the master moves the
//! adversary commits the full loss vector of the round, the master is allowed
//! to read a single entry of it, and afterwards the adversary learns which
//! expert was played (never the exploration flag). The full vector is the
//! analysis side channel.
//!
//! [`ResponsiveEnvironment`] is the base-round protocol used by the period
//! wrapper: an expert strategy is put in control for one base round at a time
//! and the environment keeps its own state across rounds.

pub mod adaptive;
pub mod game;
pub mod oblivious;

pub use adaptive::{AdaptiveEnvironment, AdaptiveRule};
pub use game::{
    pd_tit_for_tat, strategy_experts, Action, GameBandit, LossMatrix, MemoryOneStrategy, Opponent,
    RepeatedGame, StrategyFamily,
};
pub use oblivious::{oblivious_worst_case, ObliviousEnvironment};

pub trait Environment {
    fn num_experts(&self) -> usize;

    /// Writes the losses of round `t` for every expert into `losses`. Each
    /// value must lie in `[0, loss_bound]`.
    fn assign(&mut self, t: u64, loss_bound: f64, losses: &mut [f64]);

    /// Tells the adversary which expert the master played in round `t`.
    fn reveal(&mut self, t: u64, chosen: usize);
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn num_experts(&self) -> usize {
        (**self).num_experts()
    }

    fn assign(&mut self, t: u64, loss_bound: f64, losses: &mut [f64]) {
        (**self).assign(t, loss_bound, losses)
    }

    fn reveal(&mut self, t: u64, chosen: usize) {
        (**self).reveal(t, chosen)
    }
}

/// A stateful environment driven one base round at a time by an expert strategy.
pub trait ResponsiveEnvironment: Clone {
    type Strategy;

    /// Plays one base round with `strategy` in control and returns its loss in `[0, 1]`.
    fn play(&mut self, strategy: &Self::Strategy) -> f64;
}
