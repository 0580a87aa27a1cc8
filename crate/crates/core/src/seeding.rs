//! Deterministic derivation of child RNG seeds.
//!
//! Every random decision in the crate draws from a `ChaCha8Rng` seeded
//! through [`derive`], so adding trees to a forest or features to a node
//! never perturbs the streams of the parts that already existed.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent seed for stream `stream` of the generator rooted at
/// `base`. Distinct `(base, stream)` pairs map to distinct seeds for all
/// practical purposes.
pub fn derive(base: u64, stream: u64) -> u64 {
    splitmix(base ^ splitmix(stream.wrapping_add(GOLDEN)))
}

/// A seeded generator. ChaCha8 keeps the stream stable across platforms and
/// crate versions.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
