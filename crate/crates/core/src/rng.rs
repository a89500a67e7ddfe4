//! Seeded random streams.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`]. A master seed
//! expands into a ChaCha key via `seed_from_u64`, and independent streams
//! are selected with the generator's 64-bit stream id, so stream `i` of seed
//! `s` is the same on every platform and independent of the order in which
//! streams are consumed.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// Random stream `index` of `master_seed`.
pub fn stream(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Derives a child seed, used to give each repetition or sweep cell its own
/// master seed. SplitMix64 finaliser over the pair.
pub fn mix(master_seed: u64, index: u64) -> u64 {
    let mut z = master_seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
