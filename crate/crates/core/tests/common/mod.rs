//! Fixtures shared by the integration suites.
#![allow(dead_code)]

pub mod blend_check;
pub mod decontam_oracle;
pub mod sketch;

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use curator_core::corpus::{emit_shard, CorpusShard, Document};
use curator_core::dedup::token_feature;
use curator_core::pipeline::{PipelineConfig, TaskSpec};
use rand::seq::SliceRandom;
use rand::Rng;

pub const ENGLISH_WORDS: &[&str] = &[
    "the", "of", "and", "to", "in", "is", "was", "that", "for", "it", "with", "as", "on", "be", "at", "by", "this",
    "had", "not", "are", "but", "from", "or", "have", "an", "they", "which", "one", "you", "were", "her", "all", "she",
    "there", "would", "their", "we", "him", "been", "has", "when", "who", "will", "more", "no", "if", "out", "so",
    "said", "what", "up", "its", "about", "into", "than", "them", "can", "only", "other", "new", "some", "could",
    "time", "these", "two", "may", "then", "do", "first", "any", "my", "now", "such", "like", "our", "over", "man",
    "me", "even", "most", "made", "after", "also", "did", "many", "before", "must", "through", "years", "where",
    "much", "your", "way", "well", "down", "should", "because", "each", "just", "those", "people", "how", "too",
    "little", "state", "good", "very", "make", "world", "still", "own", "see", "men", "work", "long", "get", "here",
    "between", "both", "life", "being", "under", "never", "day", "same", "another", "know", "while", "last", "might",
    "great", "old", "year", "off", "come", "since", "against", "go", "came", "right", "used", "take", "three", "house",
    "water", "river", "city", "school", "children", "history", "country",
];

pub const FORMAL_WORDS: &[&str] = &[
    "consequently",
    "methodology",
    "hypothesis",
    "empirical",
    "furthermore",
    "substantial",
    "analysis",
    "theoretical",
    "framework",
    "evaluation",
    "significant",
    "comprehensive",
    "literature",
    "demonstrate",
    "subsequent",
    "paradigm",
    "investigation",
    "quantitative",
    "principle",
    "synthesis",
];

pub const BOILERPLATE_WORDS: &[&str] = &[
    "click",
    "subscribe",
    "cookie",
    "login",
    "cart",
    "checkout",
    "newsletter",
    "unsubscribe",
    "banner",
    "popup",
    "coupon",
    "shipping",
    "promo",
    "signup",
    "password",
    "captcha",
    "download",
    "advert",
    "sponsored",
    "deal",
];

const FRENCH_WORDS: &[&str] = &[
    "le", "la", "les", "de", "des", "du", "et", "est", "une", "un", "dans", "pour", "pas", "qui", "que", "avec", "sur",
    "nous", "vous", "ils", "elle", "mais", "comme", "plus", "tout", "bien", "fait", "cette", "leur", "sont", "aussi",
    "très", "deux", "temps", "jour", "monde", "ville", "maison", "enfants", "histoire", "pays", "toujours", "encore",
    "peut", "avoir", "faire", "être", "entre",
];

fn sentences(rng: &mut impl Rng, vocab: &[&str], extra: &[&str], extra_rate: f64, min_chars: usize) -> String {
    let mut out = String::new();
    while out.chars().count() < min_chars {
        let len = rng.gen_range(8..16);
        let mut words: Vec<&str> = (0..len)
            .map(|_| if rng.gen_bool(extra_rate) { *extra.choose(rng).unwrap() } else { *vocab.choose(rng).unwrap() })
            .collect();
        let first = words[0];
        let cap: String = first.chars().take(1).flat_map(char::to_uppercase).chain(first.chars().skip(1)).collect();
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&cap);
        words.remove(0);
        for w in words {
            out.push(' ');
            out.push_str(w);
        }
        out.push('.');
    }
    out
}

/// English prose of at least `min_chars` code points.
pub fn english_text(rng: &mut impl Rng, min_chars: usize) -> String {
    sentences(rng, ENGLISH_WORDS, &[], 0.0, min_chars)
}

pub fn formal_text(rng: &mut impl Rng, min_chars: usize) -> String {
    sentences(rng, ENGLISH_WORDS, FORMAL_WORDS, 0.3, min_chars)
}

pub fn boilerplate_text(rng: &mut impl Rng, min_chars: usize) -> String {
    sentences(rng, ENGLISH_WORDS, BOILERPLATE_WORDS, 0.3, min_chars)
}

pub fn french_text(rng: &mut impl Rng, min_chars: usize) -> String {
    sentences(rng, FRENCH_WORDS, &[], 0.0, min_chars)
}

/// Hands out words whose hashed feature ids are distinct from every word
/// handed out before, so constructed sets have exact Jaccard values after
/// vectorization.
pub struct FeatureWords {
    used: HashSet<u32>,
    next: u64,
    prefix: &'static str,
}

impl FeatureWords {
    pub fn new(prefix: &'static str) -> Self {
        Self { used: HashSet::new(), next: 0, prefix }
    }

    pub fn reserve(&mut self, word: &str) {
        self.used.insert(token_feature(word));
    }

    pub fn take(&mut self, count: usize) -> Vec<String> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let w = format!("{}{:x}", self.prefix, self.next);
            self.next += 1;
            if self.used.insert(token_feature(&w)) {
                out.push(w);
            }
        }
        out
    }
}

pub struct PlantedCorpus {
    pub docs: Vec<Document>,
    /// Pairs at exact Jaccard 0.9.
    pub high: Vec<(u64, u64)>,
    /// Pairs at exact Jaccard 80/300.
    pub low: Vec<(u64, u64)>,
}

/// `total` documents of 190 words: `n_high` pairs sharing 180 words
/// (J = 0.9), `n_low` pairs sharing 80 (J ≈ 0.267), and background documents
/// drawn from a separate 50k-word pool.
pub fn planted_corpus(rng: &mut impl Rng, total: usize, n_high: usize, n_low: usize) -> PlantedCorpus {
    const LEN: usize = 190;
    let mut words = FeatureWords::new("p");
    let mut docs = Vec::with_capacity(total);
    let mut high = Vec::new();
    let mut low = Vec::new();
    let mut id = 0u64;
    let mut push = |docs: &mut Vec<Document>, ws: Vec<String>| -> u64 {
        id += 1;
        docs.push(Document::new(id * 7919, "cc", ws.join(" ")));
        id * 7919
    };

    for (count, shared, out) in [(n_high, 180usize, &mut high), (n_low, 80usize, &mut low)] {
        for _ in 0..count {
            let common = words.take(shared);
            let mut a = common.clone();
            a.extend(words.take(LEN - shared));
            let mut b = common;
            b.extend(words.take(LEN - shared));
            a.shuffle(rng);
            b.shuffle(rng);
            let ia = push(&mut docs, a);
            let ib = push(&mut docs, b);
            out.push((ia, ib));
        }
    }
    let pool = words.take(50_000);
    while docs.len() < total {
        let ws: Vec<String> = pool.choose_multiple(rng, LEN).cloned().collect();
        push(&mut docs, ws);
    }
    docs.shuffle(rng);
    PlantedCorpus { docs, high, low }
}

/// Task lines for decontamination fixtures: each line is 20 unique words.
pub fn task_lines(count: usize) -> Vec<String> {
    let mut words = FeatureWords::new("task");
    (0..count).map(|_| words.take(20).join(" ")).collect()
}

pub struct PipelineFixture {
    pub inputs: Vec<PathBuf>,
    pub task_file: PathBuf,
}

/// A 1000-document corpus over three shards exercising every stage:
/// long English prose in three datasets, short and javascript boilerplate,
/// French text, near-duplicates across datasets and task-contaminated text.
pub fn pipeline_fixture(dir: &Path, rng: &mut impl Rng) -> PipelineFixture {
    let tasks = task_lines(10);
    let task_file = dir.join("task.txt");
    std::fs::write(&task_file, tasks.join("\n") + "\n").unwrap();

    let mut shards: Vec<Vec<Document>> = vec![Vec::new(), Vec::new(), Vec::new()];
    let mut next_id = 1000u64;
    let mut add = |shards: &mut Vec<Vec<Document>>, shard: usize, dataset: &str, text: String| {
        next_id += 1;
        shards[shard].push(Document::new(next_id, dataset, text));
        next_id
    };

    let mut wiki_texts = Vec::new();
    for _ in 0..250 {
        let t = {
            let n = rng.gen_range(600..1500);
            formal_text(rng, n)
        };
        wiki_texts.push(t.clone());
        add(&mut shards, 0, "wiki", t);
    }
    for _ in 0..150 {
        let t = {
            let n = rng.gen_range(600..1500);
            boilerplate_text(rng, n)
        };
        add(&mut shards, 1, "forum", t);
    }
    // Near-duplicates of wiki pages in cc: one word appended.
    for t in wiki_texts.iter().take(60) {
        add(&mut shards, 2, "cc", format!("{t} Copied."));
    }
    for _ in 0..30 {
        let t = {
            let n = rng.gen_range(100..500);
            english_text(rng, n)
        };
        add(&mut shards, 2, "cc", t);
    }
    for _ in 0..10 {
        add(&mut shards, 2, "cc", "Please enable JavaScript to view this page.".to_string());
    }
    for _ in 0..30 {
        let t = french_text(rng, 700);
        add(&mut shards, 2, "cc", t);
    }
    for i in 0..40 {
        let before = {
            let n = rng.gen_range(50..800);
            english_text(rng, n)
        };
        let after = {
            let n = rng.gen_range(50..800);
            english_text(rng, n)
        };
        add(&mut shards, 2, "cc", format!("{before} {} {after}", tasks[i % tasks.len()]));
    }
    while shards.iter().map(Vec::len).sum::<usize>() < 1000 {
        let t = {
            let n = rng.gen_range(600..1800);
            english_text(rng, n)
        };
        add(&mut shards, 2, "cc", t);
    }

    let inputs = shards
        .into_iter()
        .enumerate()
        .map(|(i, docs)| {
            let path = dir.join(format!("input-{i}.jsonl"));
            emit_shard(&CorpusShard::new(&path, docs), &path).unwrap();
            path
        })
        .collect();
    PipelineFixture { inputs, task_file }
}

/// Full seven-stage config over the fixture.
pub fn fixture_config(fixture: &PipelineFixture, output_dir: &Path) -> PipelineConfig {
    let mut cfg = PipelineConfig::from_toml(
        r#"
        seed = 17
        output_dir = "unused"
        stages = ["clean", "score", "quality_filter", "dedup", "decontaminate", "blend", "plan"]
        priority = ["wiki", "forum", "cc"]

        [score]
        datasets = ["cc", "forum"]
        [score.train]
        positive_datasets = ["wiki"]
        negative_datasets = ["forum"]

        [quality_filter]
        datasets = ["cc"]

        [blend]
        batch_size = 64
        steps = 40
        datasets = [
            { name = "wiki", weight_percent = 40.0 },
            { name = "forum", weight_percent = 10.0 },
            { name = "cc", weight_percent = 50.0 },
        ]

        [plan.model]
        parameters = 530e9
        layers = 105
        hidden = 20480
        heads = 128
        sequence = 2048
        [plan.parallel]
        tensor = 8
        pipeline = 35
        data = 8
        batch = 1920
        micro_batches = 240
        [plan.topology]
        nodes = 280
        gpus_per_node = 8
        "#,
    )
    .unwrap();
    cfg.inputs = fixture.inputs.clone();
    cfg.output_dir = output_dir.to_path_buf();
    cfg.decontaminate.tasks = vec![TaskSpec { name: "task".into(), path: fixture.task_file.clone(), n: 13 }];
    cfg
}

/// Every regular file under `root`, relative path → bytes, sorted.
pub fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}
