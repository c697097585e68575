//! Repeated prisoner's dilemma against a reactive opponent, and the
//! memory-one strategies used as experts.

use super::{Environment, ResponsiveEnvironment};
use crate::error::{FoeError, Result};
use crate::family::ExpertFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Cooperate,
    Defect,
}

impl Action {
    fn bit(self) -> usize {
        match self {
            Action::Cooperate => 0,
            Action::Defect => 1,
        }
    }

    fn symbol(self) -> char {
        match self {
            Action::Cooperate => 'C',
            Action::Defect => 'D',
        }
    }
}

/// Base-round losses indexed by (my action, opponent action), each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossMatrix {
    pub cc: f64,
    pub cd: f64,
    pub dc: f64,
    pub dd: f64,
}

impl LossMatrix {
    pub fn new(cc: f64, cd: f64, dc: f64, dd: f64) -> Result<Self> {
        for (name, v) in [("cc", cc), ("cd", cd), ("dc", dc), ("dd", dd)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(FoeError::InvalidArgument(format!(
                    "loss matrix entry {name} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(Self { cc, cd, dc, dd })
    }

    /// Mutual cooperation 0.25, mutual defection 0.75, exploited cooperator 1,
    /// successful defector 0.
    pub fn prisoners_dilemma() -> Self {
        Self {
            cc: 0.25,
            cd: 1.0,
            dc: 0.0,
            dd: 0.75,
        }
    }

    pub fn loss(&self, mine: Action, theirs: Action) -> f64 {
        use Action::*;
        match (mine, theirs) {
            (Cooperate, Cooperate) => self.cc,
            (Cooperate, Defect) => self.cd,
            (Defect, Cooperate) => self.dc,
            (Defect, Defect) => self.dd,
        }
    }

    /// Defection is never worse in a single round and strictly better against
    /// some opponent action.
    pub fn defection_dominates(&self) -> bool {
        self.dc <= self.cc && self.dd <= self.cd && (self.dc < self.cc || self.dd < self.cd)
    }

    pub fn cooperation_pays(&self) -> bool {
        self.cc < self.dd
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Opponent {
    /// Cooperates first, then repeats the player's previous action.
    TitForTat,
    AlwaysCooperate,
    AlwaysDefect,
}

impl Opponent {
    fn opening(self) -> Action {
        match self {
            Opponent::TitForTat | Opponent::AlwaysCooperate => Action::Cooperate,
            Opponent::AlwaysDefect => Action::Defect,
        }
    }

    fn respond(self, player: Action) -> Action {
        match self {
            Opponent::TitForTat => player,
            Opponent::AlwaysCooperate => Action::Cooperate,
            Opponent::AlwaysDefect => Action::Defect,
        }
    }
}

/// Deterministic strategy that sees the previous base round only.
///
/// `table` is indexed by `2 * my_last + their_last` with `C = 0`, `D = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MemoryOneStrategy {
    pub first: Action,
    pub table: [Action; 4],
}

impl MemoryOneStrategy {
    pub fn always(action: Action) -> Self {
        Self {
            first: action,
            table: [action; 4],
        }
    }

    pub fn tit_for_tat() -> Self {
        use Action::*;
        Self {
            first: Cooperate,
            table: [Cooperate, Defect, Cooperate, Defect],
        }
    }

    pub fn act(&self, last: Option<(Action, Action)>) -> Action {
        match last {
            None => self.first,
            Some((mine, theirs)) => self.table[2 * mine.bit() + theirs.bit()],
        }
    }

    pub fn is_constant(&self) -> bool {
        self.table.iter().all(|&a| a == self.first)
    }

    pub fn code(&self) -> String {
        let mut s = String::with_capacity(6);
        s.push(self.first.symbol());
        s.push(':');
        s.extend(self.table.iter().map(|a| a.symbol()));
        s
    }
}

/// Repeated game state: the opponent's pending action and the last joint move.
#[derive(Debug, Clone, PartialEq)]
pub struct RepeatedGame {
    matrix: LossMatrix,
    opponent: Opponent,
    opponent_next: Action,
    last: Option<(Action, Action)>,
    rounds: u64,
}

impl RepeatedGame {
    pub fn new(matrix: LossMatrix, opponent: Opponent) -> Self {
        Self {
            matrix,
            opponent,
            opponent_next: opponent.opening(),
            last: None,
            rounds: 0,
        }
    }

    pub fn matrix(&self) -> &LossMatrix {
        &self.matrix
    }

    pub fn last_moves(&self) -> Option<(Action, Action)> {
        self.last
    }

    pub fn rounds_played(&self) -> u64 {
        self.rounds
    }

    /// Plays one base round with an explicit action.
    pub fn play_action(&mut self, mine: Action) -> f64 {
        let theirs = self.opponent_next;
        let loss = self.matrix.loss(mine, theirs);
        self.opponent_next = self.opponent.respond(mine);
        self.last = Some((mine, theirs));
        self.rounds += 1;
        loss
    }
}

impl ResponsiveEnvironment for RepeatedGame {
    type Strategy = MemoryOneStrategy;

    fn play(&mut self, strategy: &MemoryOneStrategy) -> f64 {
        let mine = strategy.act(self.last);
        self.play_action(mine)
    }
}

/// Prisoner's dilemma with the default matrix against Tit-for-Tat.
pub fn pd_tit_for_tat() -> RepeatedGame {
    RepeatedGame::new(LossMatrix::prisoners_dilemma(), Opponent::TitForTat)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyFamily {
    /// Always-cooperate and always-defect under a uniform prior.
    PdBasic,
    /// Every deterministic memory-one strategy, weighted `2^-code length`,
    /// with entering times `ceil(w^-alpha)`.
    PdTable { alpha: f64 },
}

/// Length of the code of a constant strategy: a tag bit and the action.
const CONSTANT_CODE_BITS: i32 = 2;
/// Tag bit, opening move and four table entries.
const TABLE_CODE_BITS: i32 = 6;

pub fn strategy_experts(kind: StrategyFamily) -> Result<ExpertFamily<MemoryOneStrategy>> {
    let constants = [
        ("always-C".to_string(), MemoryOneStrategy::always(Action::Cooperate)),
        ("always-D".to_string(), MemoryOneStrategy::always(Action::Defect)),
    ];
    match kind {
        StrategyFamily::PdBasic => ExpertFamily::uniform_with(constants.to_vec()),
        StrategyFamily::PdTable { alpha } => {
            let constant_weight = 2f64.powi(-CONSTANT_CODE_BITS);
            let table_weight = 2f64.powi(-TABLE_CODE_BITS);
            let mut entries: Vec<(f64, String, MemoryOneStrategy)> = constants
                .into_iter()
                .map(|(label, s)| (constant_weight, label, s))
                .collect();
            let bit = |b: usize| if b == 0 { Action::Cooperate } else { Action::Defect };
            for code in 0..32usize {
                let s = MemoryOneStrategy {
                    first: bit(code >> 4),
                    table: [bit((code >> 3) & 1), bit((code >> 2) & 1), bit((code >> 1) & 1), bit(code & 1)],
                };
                // Constant tables duplicate the short-coded constants.
                if s.is_constant() {
                    continue;
                }
                let label = if s == MemoryOneStrategy::tit_for_tat() {
                    "tit-for-tat".to_string()
                } else {
                    format!("m1-{}", s.code())
                };
                entries.push((table_weight, label, s));
            }
            ExpertFamily::from_prior(entries, alpha)
        }
    }
}

/// Exposes a responsive game as a per-round bandit adversary: the loss of
/// expert `i` at round `t` is what `i`'s strategy would incur if it played the
/// next base round from the current game state.
#[derive(Debug, Clone)]
pub struct GameBandit<G: ResponsiveEnvironment> {
    game: G,
    strategies: Vec<G::Strategy>,
}

impl<G: ResponsiveEnvironment> GameBandit<G>
where
    G::Strategy: Clone,
{
    pub fn new(game: G, family: &ExpertFamily<G::Strategy>) -> Self {
        Self {
            game,
            strategies: family.experts().iter().map(|e| e.strategy().clone()).collect(),
        }
    }

    pub fn game(&self) -> &G {
        &self.game
    }
}

impl<G: ResponsiveEnvironment> Environment for GameBandit<G> {
    fn num_experts(&self) -> usize {
        self.strategies.len()
    }

    fn assign(&mut self, _t: u64, _loss_bound: f64, losses: &mut [f64]) {
        for (l, s) in losses.iter_mut().zip(&self.strategies) {
            *l = self.game.clone().play(s);
        }
    }

    fn reveal(&mut self, _t: u64, chosen: usize) {
        self.game.play(&self.strategies[chosen]);
    }
}
