//! Deterministic random-number streams.
//!
//! Every source of randomness in the crate is an [`RngStream`]: a (seed,
//! stream id) pair that expands to a counter-based ChaCha8 generator.
//! Identical pairs produce identical sequences on every platform, which is
//! what the harness determinism checks rely on.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// A substream with the same seed; used to hand disjoint generators to
    /// workers, environments, and evaluation matches.
    pub fn substream(&self, offset: u64) -> RngStream {
        RngStream {
            seed: self.seed,
            stream: self.stream.wrapping_add(offset),
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Derives an independent generator by drawing a full key from `parent`.
pub fn fork(parent: &mut ChaCha8Rng) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    parent.fill_bytes(&mut key);
    ChaCha8Rng::from_seed(key)
}
