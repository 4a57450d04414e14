//! Tokenization shared by the vectorizer, quality features and the n-gram index.
//!
//! A token is a maximal run of Unicode alphanumeric characters, lowercased.
//! Everything else (whitespace, punctuation, symbols) separates tokens.

/// A token with its span in the original text, measured in code points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Lowercased alphanumeric runs of `text`.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_lowercase).collect()
}

/// Like [`word_tokens`] but keeps code-point offsets into `text`.
pub fn tokens_with_offsets(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, String)> = None;
    let mut idx = 0;
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            match current.as_mut() {
                Some((_, buf)) => buf.extend(ch.to_lowercase()),
                None => current = Some((idx, ch.to_lowercase().collect())),
            }
        } else if let Some((start, buf)) = current.take() {
            tokens.push(Token { text: buf, start, end: idx });
        }
        idx += 1;
    }
    if let Some((start, buf)) = current {
        tokens.push(Token { text: buf, start, end: idx });
    }
    tokens
}

/// Code-point length.
#[inline]
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Slice `text` by code-point offsets `[start, end)`.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b_start = indices.nth(start).unwrap_or(text.len());
    let b_end = if end <= start { b_start } else { indices.nth(end - start - 1).unwrap_or(text.len()) };
    &text[b_start..b_end]
}
