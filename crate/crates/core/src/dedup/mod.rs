//! Fuzzy document deduplication.
//!
//! Documents are reduced to hashed word sets ([`vectorize`]), sketched with
//! 260 MinHash slots, and banded into 20 LSH bands of 13 rows. Each bucket
//! with more than one member is thinned by anchor sampling
//! ([`dedup_bucket`]); the resulting duplicate pairs form a sparse graph
//! whose connected components each keep a single representative chosen by
//! dataset priority ([`resolve_components`]).

mod bucket;
mod components;
mod lsh;
mod minhash;
mod vectorize;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;

pub use bucket::{bucket_seed, dedup_bucket, dedup_bucket_with, DuplicatePair};
pub use components::{resolve_components, Component, DuplicateGraph, PriorityOrder, UnionFind};
pub use lsh::{band_key, collision_probability, lsh_group, BandKey};
pub use minhash::{estimate_jaccard, minhash_signature, MinHashSignature, MinHasher};
pub use vectorize::{token_feature, vectorize, FeatureSet, VECTOR_DIM};

#[derive(Debug, Error)]
pub enum DedupError {
    #[error("cannot sketch an empty feature set")]
    EmptyFeatures,
    #[error("signature length mismatch: expected {expected}, found {found}")]
    SignatureLength { expected: usize, found: usize },
    #[error("dataset {0:?} is missing from the priority order")]
    UnrankedDataset(String),
    #[error("duplicate pair refers to unknown document {0}")]
    UnknownDocument(u64),
    #[error("invalid LSH parameters: {0}")]
    Params(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// How bucket members are compared against the sampled anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    /// Exact Jaccard over feature sets.
    #[default]
    Exact,
    /// MinHash estimate from the signatures.
    Signature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LshParams {
    pub bands: usize,
    pub rows: usize,
    pub jaccard_threshold: f64,
    pub sample_iterations: usize,
    pub rng_seed: u64,
    pub similarity: SimilarityMode,
}

impl Default for LshParams {
    fn default() -> Self {
        Self {
            bands: 20,
            rows: 13,
            jaccard_threshold: 0.8,
            sample_iterations: 11,
            rng_seed: 0,
            similarity: SimilarityMode::Exact,
        }
    }
}

impl LshParams {
    pub fn signature_len(&self) -> usize {
        self.bands * self.rows
    }

    pub fn validate(&self) -> Result<(), DedupError> {
        if self.bands == 0 || self.rows == 0 {
            return Err(DedupError::Params("bands and rows must be positive".into()));
        }
        if !(self.jaccard_threshold > 0.0 && self.jaccard_threshold <= 1.0) {
            return Err(DedupError::Params(format!("jaccard_threshold {} outside (0, 1]", self.jaccard_threshold)));
        }
        Ok(())
    }
}

/// Result of [`deduplicate`].
#[derive(Debug, Clone, PartialEq)]
pub struct DedupOutcome {
    pub graph: DuplicateGraph,
    /// Buckets with more than one member.
    pub candidate_buckets: usize,
    /// Documents with no words; they are never grouped.
    pub featureless: usize,
}

/// Full fuzzy dedup over `docs`. Output is independent of thread count.
pub fn deduplicate(
    docs: &[Document],
    params: &LshParams,
    priority: &PriorityOrder,
) -> Result<DedupOutcome, DedupError> {
    params.validate()?;
    let hasher = MinHasher::for_params(params);

    let sketched: Vec<(u64, FeatureSet, Option<MinHashSignature>)> = docs
        .par_iter()
        .map(|d| {
            let f = vectorize(&d.text);
            let sig = (!f.is_empty()).then(|| hasher.signature(&f).expect("non-empty"));
            (d.doc_id, f, sig)
        })
        .collect();
    let featureless = sketched.iter().filter(|(_, _, s)| s.is_none()).count();

    let buckets = lsh_group(sketched.iter().filter_map(|(id, _, s)| s.as_ref().map(|s| (*id, s))), params);
    let candidates: Vec<&Vec<u64>> = buckets.values().filter(|m| m.len() > 1).collect();

    let features: BTreeMap<u64, FeatureSet> = sketched.iter().map(|(id, f, _)| (*id, f.clone())).collect();
    let signatures: BTreeMap<u64, &MinHashSignature> =
        sketched.iter().filter_map(|(id, _, s)| s.as_ref().map(|s| (*id, s))).collect();

    let pairs: Vec<DuplicatePair> = candidates
        .par_iter()
        .flat_map_iter(|members| match params.similarity {
            SimilarityMode::Exact => dedup_bucket(members, &features, params),
            SimilarityMode::Signature => dedup_bucket_with(members, params, |a, b| {
                estimate_jaccard(signatures[&a], signatures[&b]).unwrap_or(0.0)
            }),
        })
        .collect();

    let meta: BTreeMap<u64, String> = docs.iter().map(|d| (d.doc_id, d.dataset.clone())).collect();
    let graph = resolve_components(&pairs, priority, &meta)?;
    Ok(DedupOutcome { graph, candidate_buckets: candidates.len(), featureless })
}

#[derive(Serialize)]
struct ComponentLine<'a> {
    representative: u64,
    members: &'a [u64],
    dataset: &'a str,
}

/// One JSON object per edge: `{duplicate, anchor, similarity, band_seed}`.
pub fn write_edge_report(graph: &DuplicateGraph, path: &Path) -> Result<(), DedupError> {
    write_lines(path, graph.edges.iter().map(|e| serde_json::to_string(e).expect("serializable")))
}

/// One JSON object per multi-member component: `{representative, members, dataset}`.
pub fn write_component_report(graph: &DuplicateGraph, path: &Path) -> Result<(), DedupError> {
    write_lines(
        path,
        graph.components.iter().filter(|c| c.members.len() > 1).map(|c| {
            serde_json::to_string(&ComponentLine {
                representative: c.representative,
                members: &c.members,
                dataset: &c.dataset,
            })
            .expect("serializable")
        }),
    )
}

fn write_lines<I: Iterator<Item = String>>(path: &Path, lines: I) -> Result<(), DedupError> {
    let io = |source| DedupError::Io { path: path.to_path_buf(), source };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for line in lines {
        out.write_all(line.as_bytes()).map_err(io)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)
}
