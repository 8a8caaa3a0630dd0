//! Seeded, partitioned RNG streams.
//!
//! Every consumer of randomness draws from its own ChaCha stream derived
//! from the run seed, so adding nodes or reordering work never perturbs an
//! unrelated stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Placement = 1,
    Shadowing = 2,
    Allocation = 3,
    Traffic = 4,
}

/// RNG for `purpose`, sub-stream `index`, under `seed`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}
