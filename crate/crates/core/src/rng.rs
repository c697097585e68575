//! Seeded randomness split into named, independent streams.
//!
//! Every stream is a ChaCha8 generator keyed by the run seed and addressed by
//! `(replicate, stream)`, so two streams never share output and a replicate of
//! a Monte Carlo ensemble is reproducible on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Named randomness sources of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Exploration coin `r_t`.
    ExploreCoin = 0,
    /// Expert drawn on exploration rounds.
    ExploreChoice = 1,
    /// Exponential perturbations of the FPL scores.
    Perturbation = 2,
    /// Randomness owned by stochastic adversaries.
    Environment = 3,
    /// Draws made by analysis oracles that must stay off the master's streams.
    Oracle = 4,
}

const STREAMS: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngContract {
    seed: u64,
    replicate: u64,
}

impl RngContract {
    pub fn new(seed: u64) -> Self {
        Self { seed, replicate: 0 }
    }

    /// The `replicate`-th independent copy under the same seed.
    pub fn replicate(seed: u64, replicate: u64) -> Self {
        Self { seed, replicate }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, stream: Stream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(
            self.replicate
                .wrapping_mul(STREAMS)
                .wrapping_add(stream as u64),
        );
        rng
    }
}

/// The three generators a master run draws from.
#[derive(Debug, Clone)]
pub struct MasterStreams {
    pub explore_coin: ChaCha8Rng,
    pub explore_choice: ChaCha8Rng,
    pub perturbation: ChaCha8Rng,
}

impl MasterStreams {
    pub fn new(contract: RngContract) -> Self {
        Self {
            explore_coin: contract.stream(Stream::ExploreCoin),
            explore_choice: contract.stream(Stream::ExploreChoice),
            perturbation: contract.stream(Stream::Perturbation),
        }
    }
}
