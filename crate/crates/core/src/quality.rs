//! Hashed bag-of-ngrams quality classifier and Pareto-threshold filtering.
//!
//! Features are the lowercased alphanumeric tokens of a document plus every
//! adjacent token pair, hashed with XXH64 into 2^20 buckets and used as
//! binary presence indicators. The model is a logistic regression trained
//! with averaged SGD.
//!
//! Model file layout (little-endian):
//!
//! ```text
//! magic    4 bytes "QMDL"
//! version  u32     1
//! seed     u64     feature hash seed
//! bias     f32
//! weights  2^20 × f32
//! ```

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::corpus::Document;
use crate::hashing::{self, hash_length_prefixed};
use crate::text::word_tokens;

pub const FEATURE_DIM: usize = 1 << 20;
pub const MODEL_MAGIC: &[u8; 4] = b"QMDL";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum QualityError {
    #[error("{0} class is empty")]
    EmptyClass(&'static str),
    #[error("holdout fraction {0} must lie strictly between 0 and 1")]
    HoldoutFraction(f64),
    #[error("score {0} outside [0, 1]")]
    ScoreRange(f64),
    #[error("pareto shape must be positive, got {0}")]
    Alpha(f64),
    #[error("model file: {0}")]
    Format(String),
    #[error("model file: {0}")]
    Io(#[from] std::io::Error),
}

/// Sorted, deduplicated feature indices of `text`.
pub fn quality_features(text: &str, seed: u64) -> Vec<u32> {
    let tokens = word_tokens(text);
    let mut feats: Vec<u32> = Vec::with_capacity(tokens.len() * 2);
    for tok in &tokens {
        feats.push(bucket(hash_length_prefixed([tok.as_bytes()], seed)));
    }
    for pair in tokens.windows(2) {
        feats.push(bucket(hash_length_prefixed([pair[0].as_bytes(), pair[1].as_bytes()], seed)));
    }
    feats.sort_unstable();
    feats.dedup();
    feats
}

#[inline]
fn bucket(h: u64) -> u32 {
    (h % FEATURE_DIM as u64) as u32
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityModel {
    pub weights: Vec<f32>,
    pub bias: f32,
    pub feature_hash_seed: u64,
}

impl QualityModel {
    pub fn zeros(feature_hash_seed: u64) -> Self {
        Self { weights: vec![0.0; FEATURE_DIM], bias: 0.0, feature_hash_seed }
    }

    fn logit(&self, feats: &[u32]) -> f64 {
        self.bias as f64 + feats.iter().map(|&f| self.weights[f as usize] as f64).sum::<f64>()
    }

    pub fn score_text(&self, text: &str) -> f64 {
        sigmoid(self.logit(&quality_features(text, self.feature_hash_seed)))
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), QualityError> {
        out.write_all(MODEL_MAGIC)?;
        out.write_all(&MODEL_VERSION.to_le_bytes())?;
        out.write_all(&self.feature_hash_seed.to_le_bytes())?;
        out.write_all(&self.bias.to_le_bytes())?;
        let mut buf = Vec::with_capacity(FEATURE_DIM * 4);
        for w in &self.weights {
            buf.extend_from_slice(&w.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, QualityError> {
        let mut header = [0u8; 20];
        input.read_exact(&mut header)?;
        if &header[..4] != MODEL_MAGIC {
            return Err(QualityError::Format("bad magic bytes".into()));
        }
        let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
        if version != MODEL_VERSION {
            return Err(QualityError::Format(format!("unsupported version {version}")));
        }
        let seed = u64::from_le_bytes(header[8..16].try_into().unwrap());
        let bias = f32::from_le_bytes(header[16..20].try_into().unwrap());
        let mut raw = vec![0u8; FEATURE_DIM * 4];
        input.read_exact(&mut raw)?;
        let weights = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { weights, bias, feature_hash_seed: seed })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), QualityError> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, QualityError> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}

/// Probability of the positive (high-quality) label.
pub fn score_document(model: &QualityModel, doc: &Document) -> f64 {
    model.score_text(&doc.text)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub holdout_fraction: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Seeds the holdout split and the per-epoch shuffle.
    pub seed: u64,
    pub feature_hash_seed: u64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            holdout_fraction: 0.1,
            epochs: 5,
            learning_rate: 0.2,
            seed: 0,
            feature_hash_seed: hashing::TOKEN_HASH_SEED,
        }
    }
}

/// Indices into the positive and negative inputs, partitioned by role.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct HoldoutSplit {
    pub train_pos: Vec<usize>,
    pub train_neg: Vec<usize>,
    pub holdout_pos: Vec<usize>,
    pub holdout_neg: Vec<usize>,
}

fn split_class(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = ((n as f64 * fraction).round() as usize).clamp(usize::from(n > 1), n.saturating_sub(1));
    let holdout = idx[..k].to_vec();
    let train = idx[k..].to_vec();
    (train, holdout)
}

/// Stratified holdout split. Both classes are permuted with the same seed,
/// so identical inputs on both sides end up in the same role.
pub fn stratified_split(n_pos: usize, n_neg: usize, fraction: f64, seed: u64) -> Result<HoldoutSplit, QualityError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(QualityError::HoldoutFraction(fraction));
    }
    let (train_pos, holdout_pos) = split_class(n_pos, fraction, seed);
    let (train_neg, holdout_neg) = split_class(n_neg, fraction, seed);
    Ok(HoldoutSplit { train_pos, train_neg, holdout_pos, holdout_neg })
}

/// Fraction of holdout documents on the correct side of 0.5.
pub fn holdout_accuracy(
    model: &QualityModel,
    positives: &[Document],
    negatives: &[Document],
    split: &HoldoutSplit,
) -> f64 {
    let correct_pos = split.holdout_pos.iter().filter(|&&i| score_document(model, &positives[i]) >= 0.5).count();
    let correct_neg = split.holdout_neg.iter().filter(|&&i| score_document(model, &negatives[i]) < 0.5).count();
    let total = split.holdout_pos.len() + split.holdout_neg.len();
    if total == 0 {
        return 0.0;
    }
    (correct_pos + correct_neg) as f64 / total as f64
}

/// Train on a stratified split and report accuracy on the held-out part.
pub fn train_quality_classifier(
    positives: &[Document],
    negatives: &[Document],
    opts: &TrainOptions,
) -> Result<(QualityModel, f64), QualityError> {
    if positives.is_empty() {
        return Err(QualityError::EmptyClass("positive"));
    }
    if negatives.is_empty() {
        return Err(QualityError::EmptyClass("negative"));
    }
    let split = stratified_split(positives.len(), negatives.len(), opts.holdout_fraction, opts.seed)?;

    let fseed = opts.feature_hash_seed;
    let mut examples: Vec<(Vec<u32>, f64)> = split
        .train_pos
        .iter()
        .map(|&i| (quality_features(&positives[i].text, fseed), 1.0))
        .chain(split.train_neg.iter().map(|&i| (quality_features(&negatives[i].text, fseed), 0.0)))
        .collect();

    // Averaged SGD with the lazy-average trick: the running average is
    // w - u / c, where u accumulates c-weighted updates.
    let mut w = vec![0.0f64; FEATURE_DIM];
    let mut u = vec![0.0f64; FEATURE_DIM];
    let (mut b, mut ub) = (0.0f64, 0.0f64);
    let mut c = 1.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(hashing::mix64(opts.seed ^ 0x7472_6169_6e00_0000));
    for _ in 0..opts.epochs {
        examples.shuffle(&mut rng);
        for (feats, label) in &examples {
            let z = b + feats.iter().map(|&f| w[f as usize]).sum::<f64>();
            let g = sigmoid(z) - label;
            let step = opts.learning_rate * g;
            for &f in feats {
                w[f as usize] -= step;
                u[f as usize] -= c * step;
            }
            b -= step;
            ub -= c * step;
            c += 1.0;
        }
    }
    let model = QualityModel {
        weights: w.iter().zip(&u).map(|(wi, ui)| (wi - ui / c) as f32).collect(),
        bias: (b - ub / c) as f32,
        feature_hash_seed: fseed,
    };
    let acc = holdout_accuracy(&model, positives, negatives, &split);
    Ok((model, acc))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParetoFilterParams {
    pub alpha: f64,
    pub rng_seed: u64,
}

impl Default for ParetoFilterParams {
    fn default() -> Self {
        Self { alpha: 3.0, rng_seed: 0 }
    }
}

/// Lomax (Pareto II, scale 1) draw for `doc_id`, by inverse CDF on a
/// counter-based uniform keyed by `(seed, doc_id)`.
pub fn lomax_draw(alpha: f64, seed: u64, doc_id: u64) -> f64 {
    let u = hashing::unit_open(hashing::keyed_u64(seed, doc_id));
    u.powf(-1.0 / alpha) - 1.0
}

/// Keep iff the document's Lomax draw exceeds `1 - score`.
pub fn pareto_keep(score: f64, params: &ParetoFilterParams, doc_id: u64) -> Result<bool, QualityError> {
    if !(0.0..=1.0).contains(&score) {
        return Err(QualityError::ScoreRange(score));
    }
    if params.alpha.is_nan() || params.alpha <= 0.0 {
        return Err(QualityError::Alpha(params.alpha));
    }
    Ok(lomax_draw(params.alpha, params.rng_seed, doc_id) > 1.0 - score)
}
