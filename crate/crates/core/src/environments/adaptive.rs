use super::Environment;
use crate::error::{FoeError, Result};

/// How an adaptive adversary turns past plays into losses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdaptiveRule {
    /// `l_t^i = B_t * (plays of i before t) / (t - 1)`; round 1 is all zero.
    PunishFrequent,
    /// `l_t^i = B_t` for the expert played at `t - 1`, zero for the rest.
    PunishLast,
}

/// Adversary whose round-`t` losses depend only on the master's plays before `t`.
#[derive(Debug, Clone)]
pub struct AdaptiveEnvironment {
    rule: AdaptiveRule,
    counts: Vec<u64>,
    last: Option<usize>,
    plays: u64,
}

impl AdaptiveEnvironment {
    pub fn new(n: usize, rule: AdaptiveRule) -> Result<Self> {
        if n == 0 {
            return Err(FoeError::TooFewExperts { min: 1, got: 0 });
        }
        Ok(Self {
            rule,
            counts: vec![0; n],
            last: None,
            plays: 0,
        })
    }

    pub fn play_counts(&self) -> &[u64] {
        &self.counts
    }
}

impl Environment for AdaptiveEnvironment {
    fn num_experts(&self) -> usize {
        self.counts.len()
    }

    fn assign(&mut self, _t: u64, loss_bound: f64, losses: &mut [f64]) {
        match self.rule {
            AdaptiveRule::PunishFrequent => {
                let plays = self.plays.max(1) as f64;
                for (l, &c) in losses.iter_mut().zip(&self.counts) {
                    *l = loss_bound * (c as f64 / plays);
                }
            }
            AdaptiveRule::PunishLast => {
                for (i, l) in losses.iter_mut().enumerate() {
                    *l = if Some(i) == self.last { loss_bound } else { 0.0 };
                }
            }
        }
    }

    fn reveal(&mut self, _t: u64, chosen: usize) {
        self.counts[chosen] += 1;
        self.last = Some(chosen);
        self.plays += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn losses_depend_only_on_earlier_plays() {
        let mut env = AdaptiveEnvironment::new(3, AdaptiveRule::PunishFrequent).unwrap();
        let mut row = [0.0; 3];
        env.assign(1, 1.0, &mut row);
        assert_eq!(row, [0.0; 3]);
        env.reveal(1, 2);
        env.reveal(2, 2);
        env.reveal(3, 0);
        env.assign(4, 3.0, &mut row);
        assert_eq!(row, [1.0, 0.0, 2.0]);
        // Assigning again without a reveal changes nothing.
        let mut again = [0.0; 3];
        env.assign(4, 3.0, &mut again);
        assert_eq!(row, again);
    }

    #[test]
    fn punish_last_targets_previous_play() {
        let mut env = AdaptiveEnvironment::new(2, AdaptiveRule::PunishLast).unwrap();
        let mut row = [0.0; 2];
        env.reveal(1, 1);
        env.assign(2, 1.0, &mut row);
        assert_eq!(row, [0.0, 1.0]);
    }
}
