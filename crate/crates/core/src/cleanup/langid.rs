//! Character-trigram language identification.
//!
//! Each language is a table of trigram counts. Text is lowercased, letters
//! are kept, every other character separates words, and each word is padded
//! with one space on either side before trigrams are taken. A text is scored
//! by its add-one smoothed log-likelihood under each table; the confidence is
//! the softmax weight of the winner.
//!
//! Binary model file layout (all integers little-endian):
//!
//! ```text
//! magic        4 bytes  "LIDT"
//! version      u32      1
//! languages    u32
//! per language:
//!   code_len   u8
//!   code       code_len bytes, UTF-8
//!   entries    u32
//!   per entry: 3 × u32 code points, u32 count   (sorted by trigram)
//! ```

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MODEL_MAGIC: &[u8; 4] = b"LIDT";
pub const MODEL_VERSION: u32 = 1;

/// Texts shorter than this (in code points) get a zero-confidence verdict.
pub const MIN_DETECT_CHARS: usize = 20;

pub const UNDETERMINED: &str = "und";

type Trigram = [char; 3];

#[derive(Debug, Error)]
pub enum LangModelError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported model version {0}")]
    Version(u32),
    #[error("corrupt model: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanguageVerdict {
    /// ISO-639-1 code, or `"und"` when nothing could be decided.
    pub language: String,
    /// In `[0, 1]`.
    pub confidence: f64,
}

impl LanguageVerdict {
    pub fn undetermined() -> Self {
        Self { language: UNDETERMINED.to_string(), confidence: 0.0 }
    }
}

/// Anything that can label text with a language.
pub trait LanguageDetector: Send + Sync {
    fn detect(&self, text: &str) -> LanguageVerdict;
}

#[derive(Debug, Clone, PartialEq)]
struct LanguageProfile {
    code: String,
    counts: BTreeMap<Trigram, u32>,
    total: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrigramModel {
    profiles: Vec<LanguageProfile>,
    vocabulary: u64,
}

fn trigrams(text: &str) -> Vec<Trigram> {
    let mut out = Vec::new();
    let lowered = text.to_lowercase();
    for word in lowered.split(|c: char| !c.is_alphabetic()).filter(|w| !w.is_empty()) {
        let padded: Vec<char> = std::iter::once(' ').chain(word.chars()).chain(std::iter::once(' ')).collect();
        out.extend(padded.windows(3).map(|w| [w[0], w[1], w[2]]));
    }
    out
}

impl TrigramModel {
    /// Build from `(language code, sample text)` pairs.
    pub fn train<'a, I>(samples: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        let mut by_lang: BTreeMap<String, BTreeMap<Trigram, u32>> = BTreeMap::new();
        for (code, text) in samples {
            let counts = by_lang.entry(code.to_string()).or_default();
            for tri in trigrams(text) {
                *counts.entry(tri).or_default() += 1;
            }
        }
        Self::from_counts(by_lang)
    }

    fn from_counts(by_lang: BTreeMap<String, BTreeMap<Trigram, u32>>) -> Self {
        let mut vocab: std::collections::BTreeSet<Trigram> = Default::default();
        let profiles = by_lang
            .into_iter()
            .map(|(code, counts)| {
                vocab.extend(counts.keys().copied());
                let total = counts.values().map(|&c| c as u64).sum();
                LanguageProfile { code, counts, total }
            })
            .collect();
        Self { profiles, vocabulary: vocab.len() as u64 + 1 }
    }

    pub fn languages(&self) -> Vec<&str> {
        self.profiles.iter().map(|p| p.code.as_str()).collect()
    }

    /// Per-language log-likelihoods of `text`, in model order.
    pub fn log_likelihoods(&self, text: &str) -> Vec<(String, f64)> {
        let mut observed: HashMap<Trigram, u32> = HashMap::new();
        for tri in trigrams(text) {
            *observed.entry(tri).or_default() += 1;
        }
        self.profiles
            .iter()
            .map(|p| {
                let denom = (p.total + self.vocabulary) as f64;
                let ll: f64 = observed
                    .iter()
                    .map(|(tri, &n)| {
                        let c = p.counts.get(tri).copied().unwrap_or(0) as f64;
                        n as f64 * ((c + 1.0) / denom).ln()
                    })
                    .sum();
                (p.code.clone(), ll)
            })
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), LangModelError> {
        out.write_all(MODEL_MAGIC)?;
        out.write_all(&MODEL_VERSION.to_le_bytes())?;
        out.write_all(&(self.profiles.len() as u32).to_le_bytes())?;
        for p in &self.profiles {
            let code = p.code.as_bytes();
            let code_len = u8::try_from(code.len())
                .map_err(|_| LangModelError::Corrupt(format!("language code too long: {}", p.code)))?;
            out.write_all(&[code_len])?;
            out.write_all(code)?;
            out.write_all(&(p.counts.len() as u32).to_le_bytes())?;
            for (tri, count) in &p.counts {
                for ch in tri {
                    out.write_all(&(*ch as u32).to_le_bytes())?;
                }
                out.write_all(&count.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, LangModelError> {
        fn u32_le<R: Read>(r: &mut R) -> Result<u32, LangModelError> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            Ok(u32::from_le_bytes(b))
        }
        let mut magic = [0u8; 4];
        input.read_exact(&mut magic)?;
        if &magic != MODEL_MAGIC {
            return Err(LangModelError::BadMagic);
        }
        let version = u32_le(&mut input)?;
        if version != MODEL_VERSION {
            return Err(LangModelError::Version(version));
        }
        let n_langs = u32_le(&mut input)?;
        let mut by_lang = BTreeMap::new();
        for _ in 0..n_langs {
            let mut len = [0u8; 1];
            input.read_exact(&mut len)?;
            let mut code = vec![0u8; len[0] as usize];
            input.read_exact(&mut code)?;
            let code =
                String::from_utf8(code).map_err(|_| LangModelError::Corrupt("language code is not UTF-8".into()))?;
            let entries = u32_le(&mut input)?;
            let mut counts = BTreeMap::new();
            for _ in 0..entries {
                let mut tri = [' '; 3];
                for slot in &mut tri {
                    let cp = u32_le(&mut input)?;
                    *slot = char::from_u32(cp)
                        .ok_or_else(|| LangModelError::Corrupt(format!("invalid code point {cp:#x}")))?;
                }
                counts.insert(tri, u32_le(&mut input)?);
            }
            by_lang.insert(code, counts);
        }
        Ok(Self::from_counts(by_lang))
    }
}

impl LanguageDetector for TrigramModel {
    fn detect(&self, text: &str) -> LanguageVerdict {
        if text.chars().count() < MIN_DETECT_CHARS || self.profiles.is_empty() {
            return LanguageVerdict::undetermined();
        }
        let scores = self.log_likelihoods(text);
        let (best_idx, best_ll) =
            scores
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |acc, (i, (_, ll))| if *ll > acc.1 { (i, *ll) } else { acc });
        if !best_ll.is_finite() {
            return LanguageVerdict::undetermined();
        }
        let z: f64 = scores.iter().map(|(_, ll)| (ll - best_ll).exp()).sum();
        LanguageVerdict { language: scores[best_idx].0.clone(), confidence: (1.0 / z).clamp(0.0, 1.0) }
    }
}

/// Bundled seed corpus: `(code, text)` with one sentence per line.
pub const SEED_CORPUS: &[(&str, &str)] = &[
    ("de", include_str!("../../data/langid/de.txt")),
    ("en", include_str!("../../data/langid/en.txt")),
    ("es", include_str!("../../data/langid/es.txt")),
    ("fr", include_str!("../../data/langid/fr.txt")),
    ("it", include_str!("../../data/langid/it.txt")),
    ("nl", include_str!("../../data/langid/nl.txt")),
];

/// Every fifth line of the seed corpus is held out for evaluation.
pub fn is_heldout_line(index: usize) -> bool {
    index % 5 == 4
}

/// `(language, sentence)` pairs.
pub type Labeled = Vec<(&'static str, &'static str)>;

/// Seed sentences split into (training, held-out).
pub fn seed_split() -> (Labeled, Labeled) {
    let mut train = Vec::new();
    let mut heldout = Vec::new();
    for &(code, text) in SEED_CORPUS {
        for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            if is_heldout_line(i) {
                heldout.push((code, line));
            } else {
                train.push((code, line));
            }
        }
    }
    (train, heldout)
}

/// The default detector, trained on the training split of the seed corpus.
pub fn default_model() -> &'static TrigramModel {
    static MODEL: OnceLock<TrigramModel> = OnceLock::new();
    MODEL.get_or_init(|| TrigramModel::train(seed_split().0))
}
