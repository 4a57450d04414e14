//! Pretraining corpus curation and training-capacity planning.
//!
//! The curation side runs documents through unicode repair and rule-based
//! drops ([`cleanup`]), a hashed bag-of-ngrams quality classifier with a
//! Pareto-threshold filter ([`quality`]), MinHash/LSH fuzzy deduplication with
//! priority-based representative selection ([`dedup`]), n-gram
//! decontamination against downstream task text ([`decontam`]) and
//! deficit-tracking dataset blending ([`blend`]). [`pipeline`] strings the
//! stages together. [`planner`] holds the closed-form memory, pipeline-bubble,
//! throughput, topology and schedule arithmetic for large-model training.

pub mod blend;
pub mod cleanup;
pub mod corpus;
pub mod decontam;
pub mod dedup;
pub mod hashing;
pub mod pipeline;
pub mod planner;
pub mod quality;
pub mod text;

pub use corpus::{CorpusShard, CorpusStats, Document, DropReason};
