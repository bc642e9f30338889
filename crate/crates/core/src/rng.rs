//! Seeded random streams.
//!
//! Every stochastic component draws from ChaCha8 seeded with a 64-bit seed;
//! independent work items (ensemble runs, replicates) get their own stream
//! number on the same key, so each item is reproducible on its own.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier recorded in output manifests.
pub const ALGORITHM_ID: &str = "chacha8";

pub type SimRng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
