//! Seeded random streams.
//!
//! Every random draw in the toolkit comes from ChaCha8 seeded through
//! `SeedableRng::seed_from_u64`, with the ChaCha stream id selecting the
//! purpose. Two purposes sharing a seed never share a keystream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags; the discriminant is the ChaCha stream id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Sampling = 1,
    Noise = 2,
    SolverInit = 3,
    SolverOrder = 4,
    GroundTruth = 5,
    Packing = 6,
    Rademacher = 7,
}

pub fn stream(seed: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from a base seed and a sequence of coordinates.
pub fn derive_seed(base: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix64(base), |acc, &c| mix64(acc ^ mix64(c)))
}
