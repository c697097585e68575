use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::Environment;
use crate::error::{FoeError, Result};
use crate::rng::{RngContract, Stream};

#[derive(Debug, Clone)]
enum Source {
    /// Row `(t - 1) mod rows` is served at round `t`.
    Matrix(Vec<Vec<f64>>),
    /// Uniform `[0, B_t]` losses with one planted expert whose losses are
    /// scaled by `1 - 2 gap`, so its mean is `B_t (1/2 - gap)`.
    WorstCase {
        n: usize,
        gap: f64,
        planted: usize,
        rng: Box<ChaCha8Rng>,
    },
}

/// Loss sequence that does not depend on the master's plays.
#[derive(Debug, Clone)]
pub struct ObliviousEnvironment {
    source: Source,
}

impl ObliviousEnvironment {
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map(Vec::len).unwrap_or(0);
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(FoeError::InvalidArgument(
                "loss matrix must be non-empty and rectangular".into(),
            ));
        }
        Ok(Self {
            source: Source::Matrix(rows),
        })
    }

    /// Index of the planted low-loss expert, if any.
    pub fn planted(&self) -> Option<usize> {
        match &self.source {
            Source::Matrix(_) => None,
            Source::WorstCase { planted, .. } => Some(*planted),
        }
    }

    /// The first `horizon` loss vectors, produced from a clone.
    pub fn loss_tensor(&self, horizon: u64, loss_bound: impl Fn(u64) -> f64) -> Vec<Vec<f64>> {
        let mut env = self.clone();
        let n = env.num_experts();
        (1..=horizon)
            .map(|t| {
                let mut row = vec![0.0; n];
                env.assign(t, loss_bound(t), &mut row);
                row
            })
            .collect()
    }
}

/// Stress generator: `n` experts with i.i.d. uniform `[0, B_t]` losses, except
/// one planted expert (chosen from the seed) whose mean is lower by
/// `gap * B_t`. `gap = 0` makes all experts exchangeable.
pub fn oblivious_worst_case(n: usize, gap: f64, seed: u64) -> Result<ObliviousEnvironment> {
    if n < 2 {
        return Err(FoeError::TooFewExperts { min: 2, got: n });
    }
    if !(0.0..0.5).contains(&gap) {
        return Err(FoeError::InvalidGap(gap));
    }
    let mut rng = RngContract::new(seed).stream(Stream::Environment);
    let planted = rng.random_range(0..n);
    Ok(ObliviousEnvironment {
        source: Source::WorstCase {
            n,
            gap,
            planted,
            rng: Box::new(rng),
        },
    })
}

impl Environment for ObliviousEnvironment {
    fn num_experts(&self) -> usize {
        match &self.source {
            Source::Matrix(rows) => rows[0].len(),
            Source::WorstCase { n, .. } => *n,
        }
    }

    fn assign(&mut self, t: u64, loss_bound: f64, losses: &mut [f64]) {
        match &mut self.source {
            Source::Matrix(rows) => {
                let row = &rows[((t - 1) % rows.len() as u64) as usize];
                losses.copy_from_slice(row);
            }
            Source::WorstCase {
                gap, planted, rng, ..
            } => {
                for (i, l) in losses.iter_mut().enumerate() {
                    let u: f64 = rng.random();
                    let scale = if i == *planted { 1.0 - 2.0 * *gap } else { 1.0 };
                    *l = loss_bound * scale * u;
                }
            }
        }
    }

    fn reveal(&mut self, _t: u64, _chosen: usize) {}
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worst_case_is_reproducible() {
        let a = oblivious_worst_case(4, 0.2, 9).unwrap();
        let b = oblivious_worst_case(4, 0.2, 9).unwrap();
        assert_eq!(a.loss_tensor(200, |_| 1.0), b.loss_tensor(200, |_| 1.0));
        assert_eq!(a.planted(), b.planted());
        let c = oblivious_worst_case(4, 0.2, 10).unwrap();
        assert_ne!(a.loss_tensor(20, |_| 1.0), c.loss_tensor(20, |_| 1.0));
    }

    #[test]
    fn worst_case_respects_bound_and_gap() {
        let env = oblivious_worst_case(2, 0.2, 1).unwrap();
        let p = env.planted().unwrap();
        let tensor = env.loss_tensor(10_000, |t| (t as f64).powf(0.125));
        let mut sums = [0.0; 2];
        for (t, row) in tensor.iter().enumerate() {
            let b = ((t + 1) as f64).powf(0.125);
            for (i, &l) in row.iter().enumerate() {
                assert!((0.0..=b).contains(&l));
                sums[i] += l / b;
            }
        }
        let planted_mean = sums[p] / 10_000.0;
        let other_mean = sums[1 - p] / 10_000.0;
        assert!((planted_mean - 0.3).abs() < 0.01, "{planted_mean}");
        assert!((other_mean - 0.5).abs() < 0.01, "{other_mean}");
    }

    #[test]
    fn planted_expert_is_best_in_hindsight() {
        // Cumulative gap 0.2 T = 2000 against a standard deviation of
        // sqrt(T (0.4^2 + 1) / 12) ~ 31: a failure would be a > 60-sigma event.
        for seed in 0..20 {
            let env = oblivious_worst_case(2, 0.2, seed).unwrap();
            let p = env.planted().unwrap();
            let tensor = env.loss_tensor(10_000, |_| 1.0);
            let cum: Vec<f64> = (0..2).map(|i| tensor.iter().map(|r| r[i]).sum()).collect();
            assert!(cum[p] < cum[1 - p]);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(oblivious_worst_case(1, 0.1, 0), Err(FoeError::TooFewExperts { .. })));
        assert_eq!(oblivious_worst_case(3, 0.5, 0).unwrap_err(), FoeError::InvalidGap(0.5));
        assert!(oblivious_worst_case(3, -0.1, 0).is_err());
        assert!(oblivious_worst_case(3, 0.0, 0).is_ok());
        assert!(ObliviousEnvironment::from_matrix(vec![vec![0.1], vec![0.1, 0.2]]).is_err());
    }

    #[test]
    fn matrix_rows_cycle() {
        let mut env = ObliviousEnvironment::from_matrix(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let mut row = [0.0; 2];
        env.assign(3, 1.0, &mut row);
        assert_eq!(row, [0.0, 1.0]);
        env.assign(4, 1.0, &mut row);
        assert_eq!(row, [1.0, 0.0]);
    }
}
