//! Codepoint-indexed spans and word tokenization shared by the tagger and
//! the perturbation engine.
//!
//! Every offset stored in an annotation or an applied edit counts unicode
//! scalar values, never bytes.

use serde::{Deserialize, Serialize};

/// Half-open `[start, end)` range of codepoint offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// Number of codepoints in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Converts a codepoint offset into a byte offset. Offsets past the end clamp
/// to `text.len()`.
pub fn byte_offset(text: &str, char_offset: usize) -> usize {
    text.char_indices()
        .nth(char_offset)
        .map(|(b, _)| b)
        .unwrap_or(text.len())
}

/// Slices `text` by a codepoint span. Returns `None` when the span is out of
/// bounds or inverted.
pub fn slice(text: &str, span: Span) -> Option<&str> {
    if span.start > span.end || span.end > char_len(text) {
        return None;
    }
    let b0 = byte_offset(text, span.start);
    let b1 = byte_offset(text, span.end);
    Some(&text[b0..b1])
}

/// Replaces the codepoint span with `replacement`.
pub fn splice(text: &str, span: Span, replacement: &str) -> String {
    let b0 = byte_offset(text, span.start);
    let b1 = byte_offset(text, span.end);
    let mut out = String::with_capacity(text.len() + replacement.len());
    out.push_str(&text[..b0]);
    out.push_str(replacement);
    out.push_str(&text[b1..]);
    out
}

/// A word token with its codepoint span.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub text: &'a str,
    pub span: Span,
    /// True when the token starts a sentence (first token, or the previous
    /// non-space character is terminal punctuation).
    pub sentence_initial: bool,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Splits text into word tokens: maximal runs of alphanumeric characters,
/// allowing a single internal hyphen or apostrophe between word characters
/// ("drug-driving", "don't"). A trailing possessive `'s` is split off as its
/// own token so "BBC's" yields "BBC" and "'s".
pub fn word_tokens(text: &str) -> Vec<Token<'_>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut sentence_start = true;
    while i < chars.len() {
        let c = chars[i].1;
        if !is_word_char(c) {
            if matches!(c, '.' | '!' | '?') {
                sentence_start = true;
            }
            i += 1;
            continue;
        }
        let start = i;
        let mut end = i + 1;
        while end < chars.len() {
            let c = chars[end].1;
            if is_word_char(c) {
                end += 1;
            } else if matches!(c, '-' | '\'' | '\u{2019}')
                && end + 1 < chars.len()
                && is_word_char(chars[end + 1].1)
            {
                end += 2;
            } else {
                break;
            }
        }
        // split possessive 's
        let mut split = None;
        if end - start > 2 {
            let apo = chars[end - 2].1;
            let s = chars[end - 1].1;
            if matches!(apo, '\'' | '\u{2019}') && (s == 's' || s == 'S') {
                split = Some(end - 2);
            }
        }
        let mut push = |a: usize, b: usize, initial: bool| {
            let b0 = chars[a].0;
            let b1 = if b < chars.len() {
                chars[b].0
            } else {
                text.len()
            };
            tokens.push(Token {
                text: &text[b0..b1],
                span: Span::new(a, b),
                sentence_initial: initial,
            });
        };
        match split {
            Some(s) => {
                push(start, s, sentence_start);
                push(s, end, false);
            }
            None => push(start, end, sentence_start),
        }
        sentence_start = false;
        i = end;
    }
    tokens
}

/// Words for descriptive statistics: whitespace-delimited tokens with leading
/// and trailing punctuation trimmed; tokens that trim to nothing are dropped.
pub fn stat_words(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|w| !w.is_empty())
        .collect()
}

/// Uppercases the first character of `word`.
pub fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(f) => f.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Copies the capitalization of `model`'s first character onto `word`.
pub fn match_case(model: &str, word: &str) -> String {
    if model.chars().next().is_some_and(char::is_uppercase) {
        capitalize(word)
    } else {
        word.to_string()
    }
}
