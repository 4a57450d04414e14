use serde::{Deserialize, Serialize};

use crate::hashing::{hash_bytes, TOKEN_HASH_SEED};
use crate::text::word_tokens;

/// Number of hashed feature buckets.
pub const VECTOR_DIM: u32 = 1 << 20;

/// Sorted set of hashed word ids, each in `[0, 2^20)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct FeatureSet(Vec<u32>);

impl FeatureSet {
    /// Build from arbitrary ids; sorts and removes duplicates.
    ///
    /// # Panics
    /// If any id is outside `[0, 2^20)`.
    pub fn from_ids(mut ids: Vec<u32>) -> Self {
        assert!(ids.iter().all(|&i| i < VECTOR_DIM), "feature id out of range");
        ids.sort_unstable();
        ids.dedup();
        Self(ids)
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn intersection_len(&self, other: &FeatureSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        let (a, b) = (&self.0, &other.0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Exact Jaccard similarity. Two empty sets are defined as identical.
    pub fn jaccard(&self, other: &FeatureSet) -> f64 {
        let inter = self.intersection_len(other);
        let union = self.len() + other.len() - inter;
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

/// Feature id of a single (already lowercased) token.
#[inline]
pub fn token_feature(token: &str) -> u32 {
    (hash_bytes(token.as_bytes(), TOKEN_HASH_SEED) % VECTOR_DIM as u64) as u32
}

/// Lowercase, split on non-alphanumeric runs, hash each word with XXH64
/// (seed 0) and reduce modulo 2^20. Word presence, not counts.
pub fn vectorize(text: &str) -> FeatureSet {
    FeatureSet::from_ids(word_tokens(text).iter().map(|t| token_feature(t)).collect())
}
