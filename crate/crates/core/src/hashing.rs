//! Fixed hash functions and seed derivation.
//!
//! Everything that must agree across platforms and runs goes through this
//! module: token hashing uses XXH64 over the UTF-8 bytes with the constants
//! below, and all per-stage / per-document randomness is derived by mixing
//! keys into a base seed with the SplitMix64 finalizer.

use xxhash_rust::xxh64::{xxh64, Xxh64};

/// Seed for token → feature hashing (vectorizer and quality features).
pub const TOKEN_HASH_SEED: u64 = 0;

/// Seed for n-gram hashing in the decontamination index.
pub const NGRAM_HASH_SEED: u64 = 0x6e67_7261_6d5f_7631; // "ngram_v1"

/// Seed for LSH band keys.
pub const BAND_HASH_SEED: u64 = 0x6261_6e64_5f6b_6579; // "band_key"

/// XXH64 of a byte string.
#[inline]
pub fn hash_bytes(bytes: &[u8], seed: u64) -> u64 {
    xxh64(bytes, seed)
}

/// SplitMix64 output function. Bijective on u64.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// One SplitMix64 step: advance the state and return the mixed output.
#[inline]
pub fn splitmix_next(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    mix64(*state)
}

/// Derive a child seed from a base seed and a textual label (e.g. a stage name).
pub fn derive_seed(base: u64, label: &str) -> u64 {
    hash_bytes(label.as_bytes(), base)
}

/// Counter-based 64 random bits keyed by `(seed, counter)`.
#[inline]
pub fn keyed_u64(seed: u64, counter: u64) -> u64 {
    mix64(mix64(seed ^ 0x5851_f42d_4c95_7f2d) ^ counter.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

/// Map 64 random bits to the open interval (0, 1).
#[inline]
pub fn unit_open(bits: u64) -> f64 {
    ((bits >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Hash a sequence of byte strings, each prefixed by its length, so that
/// `["ab", "c"]` and `["a", "bc"]` hash differently.
pub fn hash_length_prefixed<'a, I>(parts: I, seed: u64) -> u64
where
    I: IntoIterator<Item = &'a [u8]>,
{
    let mut hasher = Xxh64::new(seed);
    for part in parts {
        hasher.update(&(part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    hasher.digest()
}
