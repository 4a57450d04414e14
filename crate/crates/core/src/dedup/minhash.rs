use serde::{Deserialize, Serialize};

use super::{DedupError, FeatureSet, LshParams};
use crate::hashing::{mix64, splitmix_next};

/// Per-slot minima of seeded hash functions over a feature set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MinHashSignature(Vec<u64>);

impl MinHashSignature {
    pub fn from_slots(slots: Vec<u64>) -> Self {
        Self(slots)
    }

    pub fn slots(&self) -> &[u64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The hash family `h_k(x) = mix64(x ^ key_k)`, one key per slot, keys drawn
/// from a SplitMix64 stream started at the seed.
#[derive(Debug, Clone)]
pub struct MinHasher {
    keys: Vec<u64>,
}

impl MinHasher {
    pub fn new(num_slots: usize, seed: u64) -> Self {
        let mut state = seed;
        Self { keys: (0..num_slots).map(|_| splitmix_next(&mut state)).collect() }
    }

    pub fn for_params(params: &LshParams) -> Self {
        Self::new(params.signature_len(), params.rng_seed)
    }

    pub fn num_slots(&self) -> usize {
        self.keys.len()
    }

    pub fn signature(&self, features: &FeatureSet) -> Result<MinHashSignature, DedupError> {
        if features.is_empty() {
            return Err(DedupError::EmptyFeatures);
        }
        let mut slots = vec![u64::MAX; self.keys.len()];
        for &id in features.ids() {
            let x = id as u64;
            for (slot, &key) in slots.iter_mut().zip(&self.keys) {
                let h = mix64(x ^ key);
                if h < *slot {
                    *slot = h;
                }
            }
        }
        Ok(MinHashSignature(slots))
    }
}

pub fn minhash_signature(features: &FeatureSet, params: &LshParams) -> Result<MinHashSignature, DedupError> {
    MinHasher::for_params(params).signature(features)
}

/// Fraction of slots on which the signatures agree.
pub fn estimate_jaccard(a: &MinHashSignature, b: &MinHashSignature) -> Result<f64, DedupError> {
    if a.len() != b.len() {
        return Err(DedupError::SignatureLength { expected: a.len(), found: b.len() });
    }
    if a.is_empty() {
        return Ok(1.0);
    }
    let same = a.0.iter().zip(&b.0).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.len() as f64)
}
