//! Deterministic seed derivation.
//!
//! Every random draw in the crate comes from a ChaCha12 stream whose seed is
//! derived by FNV-1a hashing a parent seed together with context tags
//! (purpose string, subject id, session index). Because each unit of work
//! derives its own stream up front, parallel execution cannot change any
//! output.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut state: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        state ^= u64::from(b);
        state = state.wrapping_mul(FNV_PRIME);
    }
    state
}

/// Child seed from a parent seed and a purpose tag.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let state = fnv1a(FNV_OFFSET, &seed.to_le_bytes());
    fnv1a(state, tag.as_bytes())
}

/// Child seed keyed additionally by an integer index (e.g. a session number).
pub fn derive_seed_n(seed: u64, tag: &str, n: u64) -> u64 {
    fnv1a(derive_seed(seed, tag), &n.to_le_bytes())
}

/// Child seed keyed additionally by an arbitrary string (e.g. a subject id).
pub fn derive_seed_str(seed: u64, tag: &str, key: &str) -> u64 {
    fnv1a(derive_seed(seed, tag), key.as_bytes())
}

/// The ChaCha12 stream for a derived seed.
pub fn rng_for(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Stable 64-bit content hash, used for report provenance.
pub fn content_hash(bytes: &[u8]) -> u64 {
    fnv1a(FNV_OFFSET, bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derivation_is_stable_and_tag_sensitive() {
        assert_eq!(derive_seed(7, "head"), derive_seed(7, "head"));
        assert_ne!(derive_seed(7, "head"), derive_seed(7, "hand"));
        assert_ne!(derive_seed(7, "head"), derive_seed(8, "head"));
        assert_ne!(derive_seed_n(7, "s", 1), derive_seed_n(7, "s", 2));
        assert_ne!(derive_seed_str(7, "s", "a"), derive_seed_str(7, "s", "b"));
    }

    #[test]
    fn streams_from_equal_seeds_agree() {
        let mut a = rng_for(derive_seed(42, "x"));
        let mut b = rng_for(derive_seed(42, "x"));
        for _ in 0..32 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }
}
