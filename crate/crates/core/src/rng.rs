//! Seeded random streams.
//!
//! Every stochastic stage draws from a ChaCha stream identified by a seed and a
//! stream id, so per-sample randomness does not depend on generation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids reserved for the different consumers of one experiment seed.
pub mod stream {
    pub const INIT: u64 = 1 << 40;
    pub const NOISE: u64 = 2 << 40;
    pub const SPLIT: u64 = 3 << 40;
    pub const TRAIN: u64 = 4 << 40;
    pub const THETA: u64 = 5 << 40;
    pub const RULE: u64 = 6 << 40;
    pub const POOL: u64 = 7 << 40;
}

/// Independent substream `id` of `seed`.
pub fn substream(seed: u64, id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
