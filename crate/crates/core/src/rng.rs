//! Reproducible random substreams.
//!
//! Every Monte-Carlo draw gets its own ChaCha8 stream keyed by the master seed
//! and selected by the draw index, so draw `i` does not depend on how many
//! other draws were generated before it or on which thread generated it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator for draw `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed derived from a parent seed and a path of indices.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(parent), |acc, &k| mix64(acc ^ mix64(k)))
}
