//! Deterministic seed derivation.
//!
//! Every random decision in the workbench draws from a ChaCha stream whose seed
//! is a pure function of (master seed, task identity). Identity is a list of
//! string parts — e.g. `["level0", "0SMOTE", "MLP", "fit"]` — hashed with
//! FNV-1a, which is stable across platforms and releases (unlike the std
//! hasher, which is explicitly unspecified).

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Hash (master, parts) into a child seed. Parts are length-separated so that
/// `["ab", "c"]` and `["a", "bc"]` derive different seeds.
pub fn derive(master: u64, parts: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in master.to_le_bytes() {
        h = (h ^ b as u64).wrapping_mul(FNV_PRIME);
    }
    for part in parts {
        for b in (part.len() as u64).to_le_bytes() {
            h = (h ^ b as u64).wrapping_mul(FNV_PRIME);
        }
        for b in part.as_bytes() {
            h = (h ^ *b as u64).wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// The one RNG constructor used throughout the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
