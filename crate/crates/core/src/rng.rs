//! Seeded random streams.
//!
//! Every consumer of randomness derives its generator from `(seed, stream)`
//! so that runs are reproducible and independent streams never overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers. Kept in one place so no two consumers collide.
pub mod streams {
    pub const INIT_POLICY: u64 = 1;
    pub const INIT_CURIOSITY: u64 = 2;
    pub const SYNTH_TRAIN: u64 = 10;
    pub const SYNTH_VAL: u64 = 11;
    pub const GRAD_CHECK: u64 = 20;
    /// Per-epoch training streams start here and are offset by the epoch index.
    pub const EPOCH_BASE: u64 = 1_000;
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
