//! Reproducible per-trajectory Gaussian streams.
//!
//! Each trajectory owns a ChaCha8 keystream selected by `(master_seed,
//! stream_id)`. ChaCha is counter based, so the increments of trajectory `k`
//! depend only on its key and step counter and never on how trajectories are
//! scheduled across workers.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Identifies one independent stream of standard-normal draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    pub fn generator(&self) -> BrownianIncrements {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        BrownianIncrements { rng }
    }
}

/// Draws pairs of independent Wiener increments.
#[derive(Debug, Clone)]
pub struct BrownianIncrements {
    rng: ChaCha8Rng,
}

impl BrownianIncrements {
    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// (ΔW1, ΔW2) with each component distributed N(0, dt).
    #[inline]
    pub fn increment(&mut self, dt: f64) -> (f64, f64) {
        let scale = dt.sqrt();
        let a = self.standard_normal();
        let b = self.standard_normal();
        (scale * a, scale * b)
    }
}

/// Sums consecutive blocks of `factor` fine increments into coarse ones,
/// so a coarse path can be driven by the same Brownian motion as a fine one.
pub fn coarsen_increments(fine: &[(f64, f64)], factor: usize) -> Vec<(f64, f64)> {
    assert!(factor >= 1, "coarsening factor must be >= 1");
    fine.chunks(factor)
        .filter(|c| c.len() == factor)
        .map(|c| {
            c.iter()
                .fold((0.0, 0.0), |acc, dw| (acc.0 + dw.0, acc.1 + dw.1))
        })
        .collect()
}
