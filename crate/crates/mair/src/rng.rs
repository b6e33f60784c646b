//! Deterministic RNG stream derivation.
//!
//! Every random draw in the crate comes from a ChaCha stream whose seed is a
//! pure function of a base seed plus context tags (epoch, instance index, a
//! purpose tag). Streams are derived, never threaded sequentially, so
//! checkpoint-resume and per-instance parallelism cannot change the numbers.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep streams for different uses disjoint.
pub mod tag {
    pub const INIT: u64 = 0x11;
    pub const SHUFFLE: u64 = 0x22;
    pub const ATTACK: u64 = 0x33;
    pub const SPLIT: u64 = 0x44;
    pub const DATA: u64 = 0x55;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with context tags into a single derived seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut s = splitmix(base);
    for &p in parts {
        s = splitmix(s ^ splitmix(p));
    }
    s
}

/// A ChaCha stream keyed by `(base, parts)`.
pub fn stream(base: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, parts))
}
