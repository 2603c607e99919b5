//! Deterministic derivation of sub-seeds from a master seed.
//!
//! Every random choice in the toolkit flows from a single 64-bit master seed
//! through [`derive_seed`], so a run is reproducible bit-for-bit from its
//! manifest. Derivation is a fixed SplitMix64 chain and does not depend on
//! platform or hasher state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step, the standard 64-bit finalizer.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a base seed with a sequence of context words into a new seed.
///
/// Distinct contexts yield independent streams; equal inputs always yield
/// the same output.
pub fn derive_seed(base: u64, context: &[u64]) -> u64 {
    let mut state = splitmix64(base);
    for &word in context {
        state = splitmix64(state ^ word);
    }
    state
}

/// Separates the tag bytes from the context words so the two cannot alias.
const TAG_BOUNDARY: u64 = 0x7461_675F_626E_6479;

/// Mix a base seed with a string tag, then numeric context words.
pub fn derive_seed_tagged(base: u64, tag: &str, context: &[u64]) -> u64 {
    let mut state = splitmix64(base);
    for byte in tag.as_bytes() {
        state = splitmix64(state ^ u64::from(*byte));
    }
    state = splitmix64(state ^ TAG_BOUNDARY);
    for &word in context {
        state = splitmix64(state ^ word);
    }
    state
}

/// Deterministic RNG for a derived seed.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
