use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{LshParams, MinHashSignature};
use crate::hashing::{hash_length_prefixed, BAND_HASH_SEED};

/// Bucket identity: band index plus the hash of that band's slot values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BandKey {
    pub band: u32,
    pub hash: u64,
}

/// `1 - (1 - s^rows)^bands`: chance that a pair with Jaccard `s` shares at
/// least one band.
pub fn collision_probability(s: f64, params: &LshParams) -> f64 {
    let s = s.clamp(0.0, 1.0);
    1.0 - (1.0 - s.powi(params.rows as i32)).powi(params.bands as i32)
}

/// Hash of band `band`: the band index and each slot, length-prefixed little-endian.
pub fn band_key(sig: &MinHashSignature, band: usize, rows: usize) -> BandKey {
    let slots = &sig.slots()[band * rows..(band + 1) * rows];
    let band_bytes = (band as u32).to_le_bytes();
    let slot_bytes: Vec<[u8; 8]> = slots.iter().map(|s| s.to_le_bytes()).collect();
    let hash =
        hash_length_prefixed(std::iter::once(&band_bytes[..]).chain(slot_bytes.iter().map(|b| &b[..])), BAND_HASH_SEED);
    BandKey { band: band as u32, hash }
}

/// Group documents by band key. Every `(band, key)` seen gets a bucket, so
/// singletons are included; member lists are sorted by doc id.
///
/// # Panics
/// If a signature is shorter than `bands × rows`.
pub fn lsh_group<'a, I>(signatures: I, params: &LshParams) -> BTreeMap<BandKey, Vec<u64>>
where
    I: IntoIterator<Item = (u64, &'a MinHashSignature)>,
{
    let mut buckets: BTreeMap<BandKey, Vec<u64>> = BTreeMap::new();
    for (doc_id, sig) in signatures {
        assert!(sig.len() >= params.signature_len(), "signature shorter than bands × rows");
        for band in 0..params.bands {
            buckets.entry(band_key(sig, band, params.rows)).or_default().push(doc_id);
        }
    }
    for members in buckets.values_mut() {
        members.sort_unstable();
        members.dedup();
    }
    buckets
}
