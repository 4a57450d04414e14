use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{FeatureSet, LshParams};
use crate::hashing::{hash_length_prefixed, mix64};

/// A document judged a near duplicate of a sampled anchor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuplicatePair {
    pub duplicate: u64,
    pub anchor: u64,
    pub similarity: f64,
    /// Seed of the bucket sampler that produced this pair.
    pub band_seed: u64,
}

/// Sampler seed for a bucket: the run seed mixed with the sorted member ids.
pub fn bucket_seed(members: &[u64], rng_seed: u64) -> u64 {
    let mut sorted = members.to_vec();
    sorted.sort_unstable();
    let bytes: Vec<[u8; 8]> = sorted.iter().map(|m| m.to_le_bytes()).collect();
    hash_length_prefixed(bytes.iter().map(|b| &b[..]), mix64(rng_seed))
}

/// Sampled approximation of all-pairs similarity within one bucket, using
/// exact Jaccard over feature sets. Members without a feature set are ignored.
pub fn dedup_bucket(bucket: &[u64], features: &BTreeMap<u64, FeatureSet>, params: &LshParams) -> Vec<DuplicatePair> {
    let present: Vec<u64> = bucket.iter().copied().filter(|id| features.contains_key(id)).collect();
    dedup_bucket_with(&present, params, |a, b| features[&a].jaccard(&features[&b]))
}

/// Bucket sampling with a caller-supplied similarity.
///
/// For up to `sample_iterations` rounds (fewer if at most one document is
/// left): draw an anchor uniformly from the remaining pool, compare it with
/// everything else still in the pool, mark those at or above the threshold as
/// its duplicates, and remove them and the anchor from the pool.
pub fn dedup_bucket_with<F>(bucket: &[u64], params: &LshParams, mut similarity: F) -> Vec<DuplicatePair>
where
    F: FnMut(u64, u64) -> f64,
{
    let mut pool: Vec<u64> = bucket.to_vec();
    pool.sort_unstable();
    pool.dedup();
    let seed = bucket_seed(&pool, params.rng_seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut marks = Vec::new();

    for _ in 0..params.sample_iterations {
        if pool.len() <= 1 {
            break;
        }
        let anchor = pool.swap_remove(rng.gen_range(0..pool.len()));
        // swap_remove disturbs order; restore it so later draws depend only on contents.
        pool.sort_unstable();
        pool.retain(|&other| {
            let sim = similarity(anchor, other);
            if sim >= params.jaccard_threshold {
                marks.push(DuplicatePair { duplicate: other, anchor, similarity: sim, band_seed: seed });
                false
            } else {
                true
            }
        });
    }
    marks
}
