//! Downstream-task decontamination by n-gram matching.
//!
//! Training documents are scanned with a sliding window of `n` normalized
//! tokens. Every window whose hash appears in a task index is cut out together
//! with 200 characters on each side. Overlapping matched windows merge into a
//! single cut and count as one split. Cut boundaries that land inside a word
//! are widened to the word edge so that no fragment starts or ends with a
//! partial token. Fragments shorter than 200 characters are discarded, and a
//! document split more than 10 times is discarded entirely.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Document;
use crate::hashing::{hash_length_prefixed, NGRAM_HASH_SEED};
use crate::text::{char_slice, tokens_with_offsets, word_tokens, Token};

pub const DEFAULT_NGRAM: usize = 13;
/// Characters removed on each side of a match.
pub const CONTEXT_CHARS: usize = 200;
/// Fragments shorter than this are discarded.
pub const MIN_FRAGMENT_CHARS: usize = 200;
/// Documents with more splits than this are discarded.
pub const MAX_SPLITS: usize = 10;

#[derive(Debug, Error)]
pub enum DecontamError {
    #[error("n-gram size must be at least 1, got {0}")]
    NgramSize(usize),
    #[error("task file {path}: {source}")]
    TaskFile {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Hash of a window of normalized tokens.
pub fn ngram_hash<S: AsRef<str>>(tokens: &[S]) -> u64 {
    hash_length_prefixed(tokens.iter().map(|t| t.as_ref().as_bytes()), NGRAM_HASH_SEED)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskNgramIndex {
    pub task_name: String,
    pub n: usize,
    pub grams: HashSet<u64>,
}

impl TaskNgramIndex {
    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn contains_window<S: AsRef<str>>(&self, window: &[S]) -> bool {
        window.len() == self.n && self.grams.contains(&ngram_hash(window))
    }
}

/// Index every `n`-token window of every task document.
pub fn build_task_ngram_index<I, S>(task_name: &str, task_docs: I, n: usize) -> Result<TaskNgramIndex, DecontamError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if n < 1 {
        return Err(DecontamError::NgramSize(n));
    }
    let mut grams = HashSet::new();
    for doc in task_docs {
        let toks = word_tokens(doc.as_ref());
        grams.extend(toks.windows(n).map(ngram_hash));
    }
    Ok(TaskNgramIndex { task_name: task_name.to_string(), n, grams })
}

/// Read a task file (one task document per line) and index it.
pub fn load_task_file(task_name: &str, path: &Path, n: usize) -> Result<TaskNgramIndex, DecontamError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| DecontamError::TaskFile { path: path.to_path_buf(), source })?;
    build_task_ngram_index(task_name, text.lines(), n)
}

/// A kept span of the original text, in code points.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub start: usize,
    pub end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitOutcome {
    pub fragments: Vec<Fragment>,
    pub splits: usize,
    pub removed: bool,
    /// Cuts that reached the start or the end of the document.
    pub trim_events: usize,
}

/// Token-index ranges `[start, end)` of windows that hit any index.
fn matched_windows(tokens: &[Token], indices: &[TaskNgramIndex]) -> Vec<(usize, usize)> {
    let mut hits = Vec::new();
    for index in indices {
        let n = index.n;
        if n == 0 || tokens.len() < n || index.is_empty() {
            continue;
        }
        for i in 0..=tokens.len() - n {
            let window: Vec<&str> = tokens[i..i + n].iter().map(|t| t.text.as_str()).collect();
            if index.grams.contains(&ngram_hash(&window)) {
                hits.push((i, i + n));
            }
        }
    }
    hits.sort_unstable();
    hits
}

/// Merge windows whose token ranges overlap.
fn merge_overlapping(hits: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut merged: Vec<(usize, usize)> = Vec::new();
    for &(s, e) in hits {
        match merged.last_mut() {
            Some(last) if s < last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    merged
}

/// Widen a cut start backwards to the start of the token it falls inside.
fn snap_start(pos: usize, tokens: &[Token]) -> usize {
    let i = tokens.partition_point(|t| t.end <= pos);
    match tokens.get(i) {
        Some(t) if t.start < pos => t.start,
        _ => pos,
    }
}

/// Widen a cut end forwards to the end of the token it falls inside.
fn snap_end(pos: usize, tokens: &[Token]) -> usize {
    let i = tokens.partition_point(|t| t.end <= pos);
    match tokens.get(i) {
        Some(t) if t.start < pos => t.end,
        _ => pos,
    }
}

/// Split one text against several indices.
pub fn split_text(text: &str, indices: &[TaskNgramIndex]) -> SplitOutcome {
    let tokens = tokens_with_offsets(text);
    let clusters = merge_overlapping(&matched_windows(&tokens, indices));
    let splits = clusters.len();
    if splits == 0 {
        let len = text.chars().count();
        return SplitOutcome {
            fragments: vec![Fragment { start: 0, end: len, text: text.to_string() }],
            splits: 0,
            removed: false,
            trim_events: 0,
        };
    }

    let len = text.chars().count();
    let mut trim_events = 0;
    let mut cuts: Vec<(usize, usize)> = Vec::with_capacity(splits);
    for &(ts, te) in &clusters {
        let span_start = tokens[ts].start;
        let span_end = tokens[te - 1].end;
        let start = span_start.saturating_sub(CONTEXT_CHARS);
        let end = (span_end + CONTEXT_CHARS).min(len);
        if start == 0 {
            trim_events += 1;
        }
        if end == len {
            trim_events += 1;
        }
        cuts.push((snap_start(start, &tokens), snap_end(end, &tokens)));
    }

    if splits > MAX_SPLITS {
        return SplitOutcome { fragments: Vec::new(), splits, removed: true, trim_events };
    }

    let mut fragments = Vec::new();
    let mut cursor = 0;
    for &(s, e) in &cuts {
        if s > cursor && s - cursor >= MIN_FRAGMENT_CHARS {
            fragments.push(Fragment { start: cursor, end: s, text: char_slice(text, cursor, s).to_string() });
        }
        cursor = cursor.max(e);
    }
    if len > cursor && len - cursor >= MIN_FRAGMENT_CHARS {
        fragments.push(Fragment { start: cursor, end: len, text: char_slice(text, cursor, len).to_string() });
    }
    let removed = fragments.is_empty();
    SplitOutcome { fragments, splits, removed, trim_events }
}

pub fn split_document(doc: &Document, index: &TaskNgramIndex) -> SplitOutcome {
    split_text(&doc.text, std::slice::from_ref(index))
}

/// Id of fragment `k` of a split document.
pub fn fragment_doc_id(parent: u64, k: usize) -> u64 {
    hash_length_prefixed([&parent.to_le_bytes()[..], &(k as u64).to_le_bytes()[..]], NGRAM_HASH_SEED ^ 0x66_7261_676d)
}

/// Counters across many documents.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecontamReport {
    pub documents: u64,
    /// Documents with at least one match.
    pub split: u64,
    pub removed: u64,
    pub split_more_than_10: u64,
    /// Documents with a cut reaching the start or end.
    pub trimmed: u64,
    pub fragments_emitted: u64,
}

impl DecontamReport {
    pub fn record(&mut self, outcome: &SplitOutcome) {
        self.documents += 1;
        if outcome.splits > 0 {
            self.split += 1;
        }
        if outcome.removed {
            self.removed += 1;
        }
        if outcome.splits > MAX_SPLITS {
            self.split_more_than_10 += 1;
        }
        if outcome.trim_events > 0 {
            self.trimmed += 1;
        }
        self.fragments_emitted += outcome.fragments.len() as u64;
    }

    pub fn merge(&mut self, other: &DecontamReport) {
        self.documents += other.documents;
        self.split += other.split;
        self.removed += other.removed;
        self.split_more_than_10 += other.split_more_than_10;
        self.trimmed += other.trimmed;
        self.fragments_emitted += other.fragments_emitted;
    }
}

/// Decontaminate one document. Untouched documents come back as-is; split
/// documents become one record per kept fragment with derived ids.
pub fn decontaminate_document(doc: &Document, indices: &[TaskNgramIndex]) -> (Vec<Document>, SplitOutcome) {
    let outcome = split_text(&doc.text, indices);
    if outcome.splits == 0 {
        return (vec![doc.clone()], outcome);
    }
    let docs = outcome
        .fragments
        .iter()
        .enumerate()
        .map(|(k, frag)| {
            let mut d = doc.clone();
            d.doc_id = fragment_doc_id(doc.doc_id, k);
            d.set_text(frag.text.clone());
            d
        })
        .collect();
    (docs, outcome)
}
