//! Seed derivation shared by every sampling stage.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-document, per-epoch seed.
///
/// `mix_seed(b, d, e) = s(s(s(b) ^ d) ^ e)` where `s` is [`splitmix64`].
pub fn mix_seed(base_seed: u64, doc_id: u64, epoch: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(base_seed) ^ doc_id) ^ epoch)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
