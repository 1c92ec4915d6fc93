//! Counter-based seed derivation.
//!
//! A single master seed fans out into independent substreams addressed by a path of
//! integer labels (trial index, trajectory id, ...). Derivation is a pure function of
//! the path, so the order in which substreams are requested never changes results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Labels for the first path component, keeping unrelated streams apart.
pub mod domain {
    pub const TRIAL: u64 = 0x7472_6961_6c00;
    pub const ENV: u64 = 0x656e_7600;
    pub const NODE: u64 = 0x6e6f_6465;
    pub const NODE_SCORE: u64 = 0x7363_6f72;
    pub const NODE_EMBED: u64 = 0x656d_6264;
    pub const VERIFY: u64 = 0x7665_7269;
    pub const BOOTSTRAP: u64 = 0x626f_6f74;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds `path` into `seed`, one mixing round per label.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(seed), |acc, &label| {
        splitmix64(acc ^ splitmix64(label))
    })
}

pub fn stream(seed: u64, path: &[u64]) -> StreamRng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}
