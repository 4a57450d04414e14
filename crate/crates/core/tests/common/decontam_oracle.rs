//! Reference decontamination: tokens and n-grams compared as strings.

use curator_core::decontam::{build_task_ngram_index, split_text, Fragment, SplitOutcome, TaskNgramIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Tok {
    pub word: String,
    pub start: usize,
    pub end: usize,
}

pub fn tokenize(text: &str) -> Vec<Tok> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_alphanumeric() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect::<String>().to_lowercase();
            out.push(Tok { word, start, end: i });
        } else {
            i += 1;
        }
    }
    out
}

pub struct Task {
    pub n: usize,
    pub grams: Vec<Vec<String>>,
}

pub fn task(docs: &[String], n: usize) -> Task {
    let mut grams: Vec<Vec<String>> = Vec::new();
    for d in docs {
        let words: Vec<String> = tokenize(d).into_iter().map(|t| t.word).collect();
        if words.len() >= n {
            for w in words.windows(n) {
                if !grams.iter().any(|g| g.as_slice() == w) {
                    grams.push(w.to_vec());
                }
            }
        }
    }
    Task { n, grams }
}

pub fn split(text: &str, tasks: &[Task]) -> SplitOutcome {
    let chars: Vec<char> = text.chars().collect();
    let len = chars.len();
    let toks = tokenize(text);
    let words: Vec<&str> = toks.iter().map(|t| t.word.as_str()).collect();

    let mut hits: Vec<(usize, usize)> = Vec::new();
    for task in tasks {
        if toks.len() < task.n {
            continue;
        }
        for i in 0..=toks.len() - task.n {
            let window = &words[i..i + task.n];
            if task.grams.iter().any(|g| g.iter().zip(window).all(|(a, b)| a == b)) {
                hits.push((i, i + task.n));
            }
        }
    }
    hits.sort();
    let mut clusters: Vec<(usize, usize)> = Vec::new();
    for (s, e) in hits {
        if let Some(last) = clusters.last_mut() {
            if s < last.1 {
                last.1 = last.1.max(e);
                continue;
            }
        }
        clusters.push((s, e));
    }
    if clusters.is_empty() {
        return SplitOutcome {
            fragments: vec![Fragment { start: 0, end: len, text: text.to_string() }],
            splits: 0,
            removed: false,
            trim_events: 0,
        };
    }

    let inside = |pos: usize| toks.iter().find(|t| t.start < pos && pos < t.end);
    let mut trims = 0;
    let mut cuts = Vec::new();
    for &(ts, te) in &clusters {
        let lo = toks[ts].start as i64 - 200;
        let hi = toks[te - 1].end + 200;
        let start = if lo <= 0 {
            trims += 1;
            0
        } else {
            lo as usize
        };
        let end = if hi >= len {
            trims += 1;
            len
        } else {
            hi
        };
        let start = inside(start).map_or(start, |t| t.start);
        let end = inside(end).map_or(end, |t| t.end);
        cuts.push((start, end));
    }
    if clusters.len() > 10 {
        return SplitOutcome { fragments: vec![], splits: clusters.len(), removed: true, trim_events: trims };
    }
    let mut fragments = Vec::new();
    let mut cursor = 0;
    let keep = |a: usize, b: usize, fragments: &mut Vec<Fragment>| {
        if b > a && b - a >= 200 {
            fragments.push(Fragment { start: a, end: b, text: chars[a..b].iter().collect() });
        }
    };
    for (s, e) in cuts {
        keep(cursor, s, &mut fragments);
        cursor = cursor.max(e);
    }
    keep(cursor, len, &mut fragments);
    let removed = fragments.is_empty();
    SplitOutcome { fragments, splits: clusters.len(), removed, trim_events: trims }
}

const SMALL_VOCAB: &[&str] = &[
    "red", "blue", "green", "stone", "river", "cloud", "north", "south", "tree", "road", "lamp", "door", "Über",
    "naïve", "été", "x1", "42", "ÆON", "kite", "moth",
];

fn random_text(rng: &mut impl Rng, max_chars: usize) -> String {
    let seps = [" ", " ", " ", ", ", ". ", "\n", " - ", "'"];
    let mut s = String::new();
    loop {
        let w = *SMALL_VOCAB.choose(rng).unwrap();
        let sep = *seps.choose(rng).unwrap();
        if s.chars().count() + w.chars().count() + sep.chars().count() > max_chars {
            break;
        }
        s.push_str(w);
        s.push_str(sep);
    }
    s
}

/// Runs `docs` random documents through the index and the string oracle,
/// asserting equal outcomes. Returns counts of untouched, removed,
/// multi-split and single-split documents.
pub fn check_oracle_equivalence(seed: u64, docs: usize) -> [usize; 4] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let task_docs: Vec<String> = (0..6).map(|_| random_text(&mut rng, 120)).collect();
    let specs = [(3usize, &task_docs[0..2]), (5, &task_docs[2..4]), (8, &task_docs[4..6])];
    let indices: Vec<TaskNgramIndex> = specs
        .iter()
        .enumerate()
        .map(|(i, (n, docs))| build_task_ngram_index(&format!("t{i}"), docs.iter(), *n).unwrap())
        .collect();
    let tasks: Vec<Task> = specs.iter().map(|(n, docs)| task(docs, *n)).collect();
    for (idx, t) in indices.iter().zip(&tasks) {
        assert_eq!(idx.len(), t.grams.len());
    }

    let mut outcomes = [0usize; 4];
    for i in 0..docs {
        let len = rng.gen_range(0..2000);
        let mut text = random_text(&mut rng, len);
        // Plant task text in most documents so matches are common.
        if i % 4 != 0 {
            let snippet = &task_docs[rng.gen_range(0..task_docs.len())];
            let at =
                text.char_indices().map(|(b, _)| b).filter(|&b| b == 0 || text[..b].ends_with(' ')).collect::<Vec<_>>();
            let b = at.choose(&mut rng).copied().unwrap_or(0);
            text.insert_str(b, &format!("{snippet} "));
        }
        let got = split_text(&text, &indices);
        let want = split(&text, &tasks);
        assert_eq!(got, want, "document {i}: {text:?}");
        outcomes[match (got.splits, got.removed) {
            (0, _) => 0,
            (_, true) => 1,
            (s, false) if s > 1 => 2,
            _ => 3,
        }] += 1;
    }
    outcomes
}

fn english_words(rng: &mut impl Rng, n: usize) -> String {
    (0..n).map(|_| *super::ENGLISH_WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Plants task text `plants` times into English filler and checks the
/// split: deterministic, fragments ordered, disjoint, at least 200 chars
/// once anything was cut, and free of task n-grams.
pub fn check_fragment_properties(seed: u64, n: usize, plants: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let task_docs: Vec<String> = (0..3).map(|_| english_words(&mut rng, 25)).collect();
    let idx = build_task_ngram_index("t", task_docs.iter(), n).unwrap();
    let lead = rng.gen_range(0..200);
    let mut text = english_words(&mut rng, lead);
    for _ in 0..plants {
        text.push_str(". ");
        text.push_str(&task_docs[rng.gen_range(0..3)]);
        text.push(' ');
        let k = rng.gen_range(0..150);
        text.push_str(&english_words(&mut rng, k));
    }
    let indices = std::slice::from_ref(&idx);
    let out = split_text(&text, indices);
    let fail = |what: &str| Err(format!("seed {seed}, n {n}, plants {plants}: {what}"));
    if out != split_text(&text, indices) {
        return fail("nondeterministic split");
    }
    if out.removed && !out.fragments.is_empty() {
        return fail("removed document kept fragments");
    }
    let chars: Vec<char> = text.chars().collect();
    let mut prev_end = 0;
    for f in &out.fragments {
        // Untouched documents come back whole whatever their length.
        if out.splits > 0 && f.end - f.start < 200 {
            return fail("short fragment");
        }
        if f.start < prev_end || f.text != chars[f.start..f.end].iter().collect::<String>() {
            return fail("fragment span does not match its text");
        }
        if split_text(&f.text, indices).splits != 0 {
            return fail("fragment still contains a task n-gram");
        }
        prev_end = f.end;
    }
    Ok(())
}
