//! Deterministic random streams.
//!
//! All randomness in this crate comes from ChaCha8 keyed by a caller-supplied
//! `u64` seed. Independent draws for the same seed are separated by the
//! ChaCha stream id rather than by sequential consumption, so results do not
//! depend on evaluation order:
//!
//! * ancestral sampling uses one stream per row (stream = row index),
//! * the prediction-flip wrapper uses one stream per input cell
//!   (stream = cell code of the non-label attributes),
//! * the repair shuffle uses one stream per (attribute, group) pair.
//!
//! Pipelines that perform several seeded steps derive one sub-seed per step
//! with [`derive`], so a repair and a flip driven by the same pipeline seed
//! never share a key.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; the standard constants, used only for seed derivation.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a sub-seed for a named pipeline step.
pub fn derive(seed: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, then SplitMix to decorrelate from the raw seed.
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    splitmix64(seed ^ h)
}

/// ChaCha8 generator keyed by `seed` on stream `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
