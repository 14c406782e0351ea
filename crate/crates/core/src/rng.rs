//! Seeded RNG streams.
//!
//! Every run derives its generator from a master seed plus a stream index,
//! so adding repetitions never reshuffles the randomness of earlier runs.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Counter-based split of a master seed into independent streams.
pub fn stream_rng(master_seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Stream 0 of the master seed.
pub fn master_rng(master_seed: u64) -> Rng {
    stream_rng(master_seed, 0)
}
