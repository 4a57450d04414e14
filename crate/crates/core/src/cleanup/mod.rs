//! Text repair, language identification and the rule-based drops.

pub mod langid;
pub mod mojibake;

use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Document, DropReason};

pub use langid::{LanguageDetector, LanguageVerdict, TrigramModel};

/// Documents shorter than this many code points are dropped.
pub const MIN_CHARS: usize = 512;
/// Documents mentioning javascript and shorter than this are dropped.
pub const JAVASCRIPT_MAX_CHARS: usize = 256;
pub const JAVASCRIPT_WORD: &str = "javascript";
pub const TARGET_LANGUAGE: &str = "en";

const MAX_FIX_ROUNDS: usize = 8;

fn strip_controls(text: &str) -> String {
    text.chars().filter(|&c| !c.is_control() || c == '\n' || c == '\t').collect()
}

fn fix_round(text: &str) -> String {
    // Order matters: Latin-1 style garbage contains C1 controls, so repair
    // runs before stripping.
    let repaired = mojibake::repair(text);
    let stripped = strip_controls(&repaired);
    stripped.nfc().collect()
}

/// Repair text: mojibake table, then control characters other than `\n` and
/// `\t` removed, then NFC. The three rules are re-applied until the text stops
/// changing, so the function is idempotent.
pub fn fix_text(text: &str) -> String {
    let mut current = fix_round(text);
    for _ in 1..MAX_FIX_ROUNDS {
        let next = fix_round(&current);
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// Language of `text` under the bundled trigram model.
pub fn detect_language(text: &str) -> LanguageVerdict {
    langid::default_model().detect(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RuleDecision {
    Keep,
    Drop(DropReason),
}

impl RuleDecision {
    pub fn is_keep(self) -> bool {
        matches!(self, RuleDecision::Keep)
    }
}

/// Language, then length, then the javascript rule.
///
/// The javascript rule can never fire on its own since anything under 256
/// characters is already under 512; it is checked anyway so the reported
/// reason follows the fixed precedence.
pub fn apply_rules(doc: &Document, verdict: &LanguageVerdict) -> RuleDecision {
    if verdict.language != TARGET_LANGUAGE {
        return RuleDecision::Drop(DropReason::Language);
    }
    if doc.char_count < MIN_CHARS {
        return RuleDecision::Drop(DropReason::Short);
    }
    if doc.char_count < JAVASCRIPT_MAX_CHARS && doc.text.to_lowercase().contains(JAVASCRIPT_WORD) {
        return RuleDecision::Drop(DropReason::Javascript);
    }
    RuleDecision::Keep
}

/// Fix, detect and apply rules. Returns the repaired document or the drop reason.
pub fn clean_document(mut doc: Document, detector: &dyn LanguageDetector) -> Result<Document, DropReason> {
    let fixed = fix_text(&doc.text);
    if fixed != doc.text {
        doc.set_text(fixed);
    }
    let verdict = detector.detect(&doc.text);
    match apply_rules(&doc, &verdict) {
        RuleDecision::Keep => Ok(doc),
        RuleDecision::Drop(reason) => Err(reason),
    }
}
