//! Seed derivation. Every random stream in a run is keyed off the experiment
//! seed plus a fixed tag and indices, so runs are reproducible regardless of
//! evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a base seed with a stream tag and indices into a new seed.
pub fn derive_seed(base: u64, tag: u64, indices: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ splitmix64(tag));
    for &i in indices {
        h = splitmix64(h ^ i.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    }
    h
}

pub fn rng_for(base: u64, tag: u64, indices: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, tag, indices))
}

pub mod tags {
    pub const DATA: u64 = 1;
    pub const PARTITION: u64 = 2;
    pub const LOCAL_TRAIN: u64 = 3;
    pub const ATTACK_TRAIN: u64 = 4;
    pub const NOISE: u64 = 5;
    pub const INIT: u64 = 6;
}
