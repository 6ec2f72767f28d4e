//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every stochastic routine takes a `u64` seed and derives sub-streams from
//! `(seed, index...)` with a SplitMix64 mixer, so trial `t` draws the same
//! numbers regardless of which worker runs it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes a seed together with a path of indices into a new seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &i| splitmix64(acc ^ splitmix64(i)))
}

/// Independent generator for sub-stream `index` of `seed`.
pub fn stream(seed: u64, index: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[index]))
}

/// Generator for an arbitrary index path.
pub fn stream_at(seed: u64, path: &[u64]) -> Stream {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}
