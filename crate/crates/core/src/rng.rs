//! Seeded random streams.
//!
//! Every randomized routine draws from a PCG-64 (XSL-RR 128/64) generator.
//! A `(seed, stream)` pair is expanded through SplitMix64 into the 128-bit
//! state, and `stream` also selects the PCG increment, so jobs keyed by e.g.
//! `(seed, repetition)` get independent sequences regardless of the order or
//! thread they run on.

use rand::SeedableRng;
use rand_pcg::Pcg64;

pub type SeededRng = Pcg64;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Generator for the given seed on the default stream.
pub fn seeded(seed: u64) -> SeededRng {
    stream(seed, 0)
}

/// Generator for an independent sub-stream of `seed`.
pub fn stream(seed: u64, stream: u64) -> SeededRng {
    let hi = splitmix64(seed ^ splitmix64(stream));
    let lo = splitmix64(hi ^ seed.rotate_left(17));
    Pcg64::new(((hi as u128) << 64) | lo as u128, stream as u128)
}

/// Mixes several words into one seed.
pub fn derive(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x5EED_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

/// Generator seeded from a single `u64` via the crate's standard expansion.
pub fn from_u64(seed: u64) -> SeededRng {
    Pcg64::seed_from_u64(seed)
}
