//! Repair of UTF-8 text that was decoded as Windows-1252 or Latin-1.
//!
//! The table is finite: for every character in [`REPAIR_TARGETS`] the UTF-8
//! bytes are re-read through both legacy code pages, and the resulting
//! two- or three-character garbage sequence maps back to the original.
//! Bump [`TABLE_VERSION`] whenever the target list changes.

use std::collections::HashMap;
use std::sync::OnceLock;

pub const TABLE_VERSION: u32 = 1;

/// Characters whose mis-decoded forms are repaired: the Latin-1 supplement
/// plus the printable Windows-1252 extras.
pub const REPAIR_TARGETS: &[char] = &[
    '\u{20AC}', '\u{201A}', '\u{0192}', '\u{201E}', '\u{2026}', '\u{2020}', '\u{2021}', '\u{02C6}', '\u{2030}',
    '\u{0160}', '\u{2039}', '\u{0152}', '\u{017D}', '\u{2018}', '\u{2019}', '\u{201C}', '\u{201D}', '\u{2022}',
    '\u{2013}', '\u{2014}', '\u{02DC}', '\u{2122}', '\u{0161}', '\u{203A}', '\u{0153}', '\u{017E}', '\u{0178}',
];

/// Windows-1252 code points for bytes 0x80..=0x9F; `None` where the byte is undefined.
const CP1252_HIGH: [Option<char>; 32] = [
    Some('\u{20AC}'),
    None,
    Some('\u{201A}'),
    Some('\u{0192}'),
    Some('\u{201E}'),
    Some('\u{2026}'),
    Some('\u{2020}'),
    Some('\u{2021}'),
    Some('\u{02C6}'),
    Some('\u{2030}'),
    Some('\u{0160}'),
    Some('\u{2039}'),
    Some('\u{0152}'),
    None,
    Some('\u{017D}'),
    None,
    None,
    Some('\u{2018}'),
    Some('\u{2019}'),
    Some('\u{201C}'),
    Some('\u{201D}'),
    Some('\u{2022}'),
    Some('\u{2013}'),
    Some('\u{2014}'),
    Some('\u{02DC}'),
    Some('\u{2122}'),
    Some('\u{0161}'),
    Some('\u{203A}'),
    Some('\u{0153}'),
    None,
    Some('\u{017E}'),
    Some('\u{0178}'),
];

fn latin1_char(byte: u8) -> char {
    byte as char
}

fn cp1252_char(byte: u8) -> char {
    if (0x80..0xA0).contains(&byte) {
        CP1252_HIGH[(byte - 0x80) as usize].unwrap_or(byte as char)
    } else {
        byte as char
    }
}

fn all_targets() -> impl Iterator<Item = char> {
    ('\u{00A0}'..='\u{00FF}').chain(REPAIR_TARGETS.iter().copied())
}

/// Garbled form → intended character.
pub fn repair_table() -> &'static HashMap<String, char> {
    static TABLE: OnceLock<HashMap<String, char>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = HashMap::new();
        for target in all_targets() {
            let mut buf = [0u8; 4];
            let bytes = target.encode_utf8(&mut buf).as_bytes();
            let as_cp1252: String = bytes.iter().map(|&b| cp1252_char(b)).collect();
            let as_latin1: String = bytes.iter().map(|&b| latin1_char(b)).collect();
            table.insert(as_cp1252, target);
            table.insert(as_latin1, target);
        }
        table
    })
}

const MAX_PATTERN_CHARS: usize = 3;

/// One left-to-right pass of longest-match replacement. Returns `None` if nothing matched.
fn repair_once(text: &str) -> Option<String> {
    let table = repair_table();
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    let mut changed = false;
    let mut i = 0;
    let mut key = String::with_capacity(12);
    'outer: while i < chars.len() {
        // Every garbled form starts with a non-ASCII character.
        if chars[i].is_ascii() {
            out.push(chars[i]);
            i += 1;
            continue;
        }
        for len in (2..=MAX_PATTERN_CHARS).rev() {
            if i + len > chars.len() {
                continue;
            }
            key.clear();
            key.extend(&chars[i..i + len]);
            if let Some(&fixed) = table.get(key.as_str()) {
                out.push(fixed);
                i += len;
                changed = true;
                continue 'outer;
            }
        }
        out.push(chars[i]);
        i += 1;
    }
    changed.then_some(out)
}

/// Replace garbled sequences until none remain. Each replacement shortens
/// the text, so this terminates; repeated passes undo multiple rounds of
/// double encoding.
pub fn repair(text: &str) -> String {
    let mut current = text.to_string();
    while let Some(next) = repair_once(&current) {
        current = next;
    }
    current
}
