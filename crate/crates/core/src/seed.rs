//! Deterministic seed derivation.
//!
//! Every stochastic draw in the simulator is keyed by a tuple of integers
//! (chip seed, component id, draw index, ...). The tuple is folded into a
//! single 64-bit seed with the SplitMix64 finalizer and handed to a ChaCha
//! generator, so a draw never depends on how many other draws happened
//! before it elsewhere in the chip.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a key tuple into one seed.
pub fn derive(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6A09_E667_F3BC_C908, |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// A generator keyed by `parts`.
pub fn rng(parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(parts))
}
