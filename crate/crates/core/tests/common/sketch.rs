//! MinHash and LSH measurement helpers.

use std::collections::BTreeSet;

use curator_core::dedup::{band_key, estimate_jaccard, FeatureSet, LshParams, MinHasher, VECTOR_DIM};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Two sets over random ids with `shared` common elements and `own` private
/// elements each; exact Jaccard is `shared / (shared + 2 own)`.
pub fn pair_with_overlap(rng: &mut impl Rng, shared: usize, own: usize) -> (FeatureSet, FeatureSet) {
    let mut ids = BTreeSet::new();
    while ids.len() < shared + 2 * own {
        ids.insert(rng.gen_range(0..VECTOR_DIM));
    }
    let mut ids: Vec<u32> = ids.into_iter().collect();
    ids.shuffle(rng);
    let (common, rest) = ids.split_at(shared);
    let (a_own, b_own) = rest.split_at(own);
    let a = FeatureSet::from_ids(common.iter().chain(a_own).copied().collect());
    let b = FeatureSet::from_ids(common.iter().chain(b_own).copied().collect());
    (a, b)
}

/// Mean and spread of the estimator on J = 0.5 sets (|A∩B| = 1000, |A∪B| = 2000).
pub fn half_jaccard_estimates(seeds: u64) -> Vec<f64> {
    (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let (a, b) = pair_with_overlap(&mut rng, 1000, 500);
            assert_eq!(a.jaccard(&b), 0.5);
            let h = MinHasher::new(260, seed);
            estimate_jaccard(&h.signature(&a).unwrap(), &h.signature(&b).unwrap()).unwrap()
        })
        .collect()
}

/// Fraction of `trials` pairs at exact Jaccard `s` sharing at least one band key.
pub fn co_bucket_frequency(s: f64, trials: u64, params: &LshParams) -> f64 {
    let union = 100usize;
    let shared = (s * union as f64).round() as usize;
    let own = (union - shared) / 2;
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(t.wrapping_mul(0x9e37_79b9) ^ (shared as u64));
            let (a, b) = pair_with_overlap(&mut rng, shared, own);
            let h = MinHasher::new(params.signature_len(), t);
            let (sa, sb) = (h.signature(&a).unwrap(), h.signature(&b).unwrap());
            (0..params.bands).any(|band| band_key(&sa, band, params.rows) == band_key(&sb, band, params.rows)) as u64
        })
        .sum();
    hits as f64 / trials as f64
}
