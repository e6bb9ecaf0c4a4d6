//! Seed fan-out.
//!
//! `derive_seed(master, path)` folds each path component into the master
//! seed with the splitmix64 finalizer:
//!
//! ```text
//! h = master
//! for k in path: h = mix(h ^ mix(k + 0x9E3779B97F4A7C15))
//! ```
//!
//! so any single run or stream can be re-created from the master seed and
//! its indices alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 output function.
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(master, |h, &k| mix(h ^ mix(k.wrapping_add(GOLDEN))))
}

pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}
