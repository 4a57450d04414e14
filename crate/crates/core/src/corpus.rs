//! Corpus records, newline-delimited JSON shard I/O and per-dataset statistics.
//!
//! A shard file holds one JSON object per line:
//!
//! ```text
//! {"doc_id":17,"dataset":"Books3","url":"https://…","text":"…","score":0.73}
//! ```
//!
//! `doc_id` may be an integer or a string. Numeric strings are parsed; other
//! strings are hashed to 64 bits. When `doc_id` is absent an id is packed from
//! `(shard index, line number)`. `url` and `score` are optional.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hashing;
use crate::text::char_len;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: line {line} (byte offset {offset}): {message}")]
    Malformed { path: PathBuf, line: usize, offset: u64, message: String },
    #[error("{path}: duplicate doc_id {doc_id} on line {first_line} and line {second_line}")]
    DuplicateId { path: PathBuf, doc_id: u64, first_line: usize, second_line: usize },
}

/// One corpus record.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub doc_id: u64,
    pub dataset: String,
    pub url: Option<String>,
    pub text: String,
    /// Code-point length of `text`.
    pub char_count: usize,
    pub score: Option<f64>,
}

impl Document {
    pub fn new(doc_id: u64, dataset: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Self { doc_id, dataset: dataset.into(), url: None, char_count: char_len(&text), text, score: None }
    }

    pub fn with_url(mut self, url: impl Into<String>) -> Self {
        self.url = Some(url.into());
        self
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    /// Replace the text, keeping `char_count` in sync.
    pub fn set_text(&mut self, text: String) {
        self.char_count = char_len(&text);
        self.text = text;
    }
}

/// An ordered sequence of documents read from (or destined for) one file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorpusShard {
    pub path: PathBuf,
    pub records: Vec<Document>,
}

impl CorpusShard {
    pub fn new(path: impl Into<PathBuf>, records: Vec<Document>) -> Self {
        Self { path: path.into(), records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawId {
    Int(u64),
    Str(String),
}

#[derive(Deserialize)]
struct RawRecord {
    doc_id: Option<RawId>,
    dataset: String,
    text: String,
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    score: Option<f64>,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    doc_id: u64,
    dataset: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    url: Option<&'a str>,
    text: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

/// Id used when a record carries no `doc_id`.
pub fn packed_doc_id(shard_index: u32, line: u32) -> u64 {
    ((shard_index as u64) << 32) | line as u64
}

fn resolve_id(raw: Option<RawId>, shard_index: u32, line: usize) -> u64 {
    match raw {
        Some(RawId::Int(id)) => id,
        Some(RawId::Str(s)) => {
            s.trim().parse::<u64>().unwrap_or_else(|_| hashing::hash_bytes(s.as_bytes(), hashing::TOKEN_HASH_SEED))
        }
        None => packed_doc_id(shard_index, line as u32),
    }
}

/// Read a shard, treating it as shard number 0 for id packing.
pub fn ingest_shard(path: impl AsRef<Path>) -> Result<CorpusShard, CorpusError> {
    ingest_shard_indexed(path, 0)
}

/// Read a shard; `shard_index` feeds the packed id of records without `doc_id`.
pub fn ingest_shard_indexed(path: impl AsRef<Path>, shard_index: u32) -> Result<CorpusShard, CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let file = File::open(path).map_err(io_err)?;
    let mut reader = BufReader::new(file);

    let mut records = Vec::new();
    let mut seen: HashMap<u64, usize> = HashMap::new();
    let mut buf = Vec::new();
    let mut offset: u64 = 0;
    let mut line_no = 0usize;
    loop {
        buf.clear();
        let n = reader.read_until(b'\n', &mut buf).map_err(io_err)?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let line_offset = offset;
        offset += n as u64;

        let malformed = |message: String| CorpusError::Malformed {
            path: path.to_path_buf(),
            line: line_no,
            offset: line_offset,
            message,
        };
        let mut content = &buf[..];
        if content.ends_with(b"\n") {
            content = &content[..content.len() - 1];
        }
        if content.ends_with(b"\r") {
            content = &content[..content.len() - 1];
        }
        if content.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        let line = std::str::from_utf8(content).map_err(|e| malformed(format!("invalid UTF-8: {e}")))?;
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        if let Some(score) = raw.score {
            if !(0.0..=1.0).contains(&score) {
                return Err(malformed(format!("score {score} outside [0, 1]")));
            }
        }
        let doc_id = resolve_id(raw.doc_id, shard_index, line_no);
        if let Some(&first_line) = seen.get(&doc_id) {
            return Err(CorpusError::DuplicateId {
                path: path.to_path_buf(),
                doc_id,
                first_line,
                second_line: line_no,
            });
        }
        seen.insert(doc_id, line_no);

        let mut doc = Document::new(doc_id, raw.dataset, raw.text);
        doc.url = raw.url;
        doc.score = raw.score;
        records.push(doc);
    }
    Ok(CorpusShard { path: path.to_path_buf(), records })
}

/// Serialize one document as a single JSON line (without the trailing newline).
pub fn document_to_json(doc: &Document) -> String {
    let rec = OutRecord {
        doc_id: doc.doc_id,
        dataset: &doc.dataset,
        url: doc.url.as_deref(),
        text: &doc.text,
        score: doc.score,
    };
    serde_json::to_string(&rec).expect("document serialization cannot fail")
}

/// Write `shard` to `path`, one JSON object per line.
pub fn emit_shard(shard: &CorpusShard, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let io_err = |source| CorpusError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    for doc in &shard.records {
        out.write_all(document_to_json(doc).as_bytes()).map_err(io_err)?;
        out.write_all(b"\n").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Why a document left the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Language,
    Short,
    Javascript,
    Quality,
    Duplicate,
    Contamination,
}

impl DropReason {
    pub const ALL: [DropReason; 6] = [
        DropReason::Language,
        DropReason::Short,
        DropReason::Javascript,
        DropReason::Quality,
        DropReason::Duplicate,
        DropReason::Contamination,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::Language => "language",
            DropReason::Short => "short",
            DropReason::Javascript => "javascript",
            DropReason::Quality => "quality",
            DropReason::Duplicate => "duplicate",
            DropReason::Contamination => "contamination",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Counts for one dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub input_docs: u64,
    pub input_chars: u64,
    pub kept_docs: u64,
    pub kept_chars: u64,
    pub dropped: BTreeMap<DropReason, u64>,
}

impl DatasetStats {
    pub fn dropped_total(&self) -> u64 {
        self.dropped.values().sum()
    }

    /// `input == kept + Σ drops`.
    pub fn is_conserved(&self) -> bool {
        self.input_docs == self.kept_docs + self.dropped_total()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub datasets: BTreeMap<String, DatasetStats>,
}

impl CorpusStats {
    pub fn record_input(&mut self, doc: &Document) {
        let entry = self.datasets.entry(doc.dataset.clone()).or_default();
        entry.input_docs += 1;
        entry.input_chars += doc.char_count as u64;
    }

    pub fn record_kept(&mut self, doc: &Document) {
        let entry = self.datasets.entry(doc.dataset.clone()).or_default();
        entry.kept_docs += 1;
        entry.kept_chars += doc.char_count as u64;
    }

    pub fn record_drop(&mut self, dataset: &str, reason: DropReason) {
        self.add_drops(dataset, reason, 1);
    }

    pub fn add_drops(&mut self, dataset: &str, reason: DropReason, count: u64) {
        if count == 0 {
            return;
        }
        let entry = self.datasets.entry(dataset.to_string()).or_default();
        *entry.dropped.entry(reason).or_default() += count;
    }

    pub fn total_input(&self) -> u64 {
        self.datasets.values().map(|d| d.input_docs).sum()
    }

    pub fn total_kept(&self) -> u64 {
        self.datasets.values().map(|d| d.kept_docs).sum()
    }

    pub fn is_conserved(&self) -> bool {
        self.datasets.values().all(DatasetStats::is_conserved)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialization cannot fail")
    }
}

/// Document and character counts per dataset. Every document counts as kept.
pub fn corpus_stats<'a, I>(shards: I) -> CorpusStats
where
    I: IntoIterator<Item = &'a CorpusShard>,
{
    let mut stats = CorpusStats::default();
    for doc in shards.into_iter().flat_map(|s| s.records.iter()) {
        stats.record_input(doc);
        stats.record_kept(doc);
    }
    stats
}
