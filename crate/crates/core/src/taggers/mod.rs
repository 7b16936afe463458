//! Lightweight linguistic resources for text that arrives without
//! annotations: gazetteer and capitalization-based entity detection, pronoun
//! lookup, rule-based verb and tense detection, and antonym lookup.
//!
//! Everything here is deterministic. Pre-annotated input always takes
//! precedence over these heuristics.

mod pronouns;
mod verbs;
mod wordnet;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use thiserror::Error;

use crate::corpus::{Annotations, EntitySpan, VerbToken};
use crate::text::{self, Span, Token};

pub use pronouns::{PronounGroup, PronounLexicon, PronounRole};
pub use verbs::{
    aux_kind, detect_tense as detect_tense_with, is_auxiliary, AuxKind, TenseGuess, VerbLexicon,
    TENSE_WINDOW,
};
pub use wordnet::parse_antonyms;

const BUNDLED_ANTONYMS: &str = include_str!("../../data/wordnet_adj.dat");
const BUNDLED_GAZETTEER: &str = include_str!("../../data/gazetteer.tsv");

/// Label given to capitalized sequences that are not in the gazetteer.
pub const HEURISTIC_ENTITY_LABEL: &str = "MISC";

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("text is empty")]
    EmptyText,
}

/// Immutable lexical resources shared by the tagger and perturbation engine.
#[derive(Debug, Clone)]
pub struct LexiconSet {
    pub pronouns: PronounLexicon,
    antonyms: BTreeMap<String, Vec<String>>,
    gazetteer: BTreeMap<String, String>,
    pub verbs: VerbLexicon,
}

impl LexiconSet {
    /// Bundled pronoun groups, verb list, gazetteer and adjective antonyms.
    pub fn bundled() -> Self {
        Self {
            pronouns: PronounLexicon::bundled(),
            antonyms: parse_antonyms(BUNDLED_ANTONYMS).expect("bundled antonym dump parses"),
            gazetteer: parse_gazetteer(BUNDLED_GAZETTEER).expect("bundled gazetteer parses"),
            verbs: VerbLexicon::bundled(),
        }
    }

    /// No vocabulary at all.
    pub fn empty() -> Self {
        Self {
            pronouns: PronounLexicon::empty(),
            antonyms: BTreeMap::new(),
            gazetteer: BTreeMap::new(),
            verbs: VerbLexicon::empty(),
        }
    }

    /// Bundled resources, with the antonym dump and gazetteer replaced by the
    /// given files when present.
    pub fn load(antonyms: Option<&Path>, gazetteer: Option<&Path>) -> Result<Self, TaggerError> {
        let mut set = Self::bundled();
        if let Some(path) = antonyms {
            let content = read(path)?;
            set.antonyms = parse_antonyms(&content).map_err(|message| TaggerError::Parse {
                path: path.to_path_buf(),
                message,
            })?;
        }
        if let Some(path) = gazetteer {
            let content = read(path)?;
            set.gazetteer = parse_gazetteer(&content).map_err(|message| TaggerError::Parse {
                path: path.to_path_buf(),
                message,
            })?;
        }
        Ok(set)
    }

    pub fn with_gazetteer(mut self, entries: BTreeMap<String, String>) -> Self {
        self.gazetteer = entries;
        self
    }

    pub fn with_antonyms(mut self, map: BTreeMap<String, Vec<String>>) -> Self {
        self.antonyms = map;
        self
    }

    pub fn antonyms_of(&self, lower: &str) -> &[String] {
        self.antonyms.get(lower).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn antonym_map(&self) -> &BTreeMap<String, Vec<String>> {
        &self.antonyms
    }

    pub fn gazetteer_label(&self, surface: &str) -> Option<&str> {
        self.gazetteer.get(surface).map(String::as_str)
    }

    pub fn detect_tense(&self, verb_span: Span, text: &str) -> TenseGuess {
        verbs::detect_tense(verb_span, text, &self.verbs)
    }
}

fn read(path: &Path) -> Result<String, TaggerError> {
    fs::read_to_string(path).map_err(|source| TaggerError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Tab-separated `surface<TAB>label` lines; `#` starts a comment line.
pub fn parse_gazetteer(content: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (n, line) in content.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        match (cols.next(), cols.next(), cols.next()) {
            (Some(surface), Some(label), None) if !surface.is_empty() && !label.is_empty() => {
                map.insert(surface.trim().to_string(), label.trim().to_string());
            }
            _ => return Err(format!("line {}: expected surface<TAB>label", n + 1)),
        }
    }
    Ok(map)
}

/// Detects the tense of the verb at `verb_span` (see [`VerbLexicon`]).
pub fn detect_tense(verb_span: Span, text: &str, lexicons: &LexiconSet) -> TenseGuess {
    lexicons.detect_tense(verb_span, text)
}

/// Picks one antonym of `word` (case-insensitive), or `None` when the word
/// has no entry.
pub fn antonym<R: Rng + ?Sized>(word: &str, lexicons: &LexiconSet, rng: &mut R) -> Option<String> {
    let options = lexicons.antonyms_of(&word.to_lowercase());
    if options.is_empty() {
        return None;
    }
    Some(options[rng.random_range(0..options.len())].clone())
}

// Capitalized words that never open an entity.
const NON_ENTITY_OPENERS: &[&str] = &[
    "the",
    "a",
    "an",
    "in",
    "on",
    "at",
    "this",
    "that",
    "these",
    "those",
    "there",
    "but",
    "and",
    "or",
    "if",
    "when",
    "while",
    "after",
    "before",
    "as",
    "for",
    "of",
    "to",
    "with",
    "by",
    "from",
    "so",
    "yet",
    "also",
    "however",
    "meanwhile",
    "some",
    "many",
    "most",
    "all",
    "what",
    "why",
    "how",
    "who",
    "where",
    "not",
    "no",
    "yes",
    "one",
];

const DETERMINERS: &[&str] = &[
    "the", "a", "an", "this", "that", "these", "those", "his", "her", "their", "its", "my", "our",
    "your", "some", "many", "any", "each", "every", "no", "several", "first", "new",
];

const PREPOSITIONS: &[&str] = &[
    "in", "on", "at", "of", "for", "with", "by", "from", "into", "about", "over", "under", "after",
    "before", "between", "during", "without", "to", "as",
];

const ADVERBS: &[&str] = &[
    "not",
    "also",
    "never",
    "still",
    "just",
    "now",
    "already",
    "recently",
    "often",
    "always",
    "reportedly",
    "allegedly",
];

const SUBJECT_PRONOUNS: &[&str] = &["i", "you", "we", "they"];

const ADJECTIVE_SUFFIXES: &[&str] = &["ous", "ful", "ive", "less", "able", "ible"];

fn only_whitespace_between(text: &str, a: &Token<'_>, b: &Token<'_>) -> bool {
    text::slice(text, Span::new(a.span.end, b.span.start))
        .is_some_and(|gap| !gap.is_empty() && gap.chars().all(char::is_whitespace))
}

fn starts_upper(w: &str) -> bool {
    w.chars().next().is_some_and(char::is_uppercase)
}

/// Heuristic annotation of `text`.
///
/// Entities are gazetteer hits (longest match first) plus runs of capitalized
/// tokens that are either multi-token or not sentence-initial. Pronouns are
/// lexicon hits on token boundaries. Verbs are detected from the verb lexicon,
/// suffixes and neighbouring auxiliaries, and carry a tense tag. Adjectives
/// are words with a known antonym or a typical adjective suffix.
pub fn annotate(text: &str, lexicons: &LexiconSet) -> Result<Annotations, TaggerError> {
    if text.trim().is_empty() {
        return Err(TaggerError::EmptyText);
    }
    let tokens = text::word_tokens(text);
    let mut claimed = vec![false; tokens.len()];
    let mut entities = Vec::new();

    // gazetteer, longest match first
    let mut i = 0;
    while i < tokens.len() {
        let mut matched = 0;
        for len in (1..=5.min(tokens.len() - i)).rev() {
            let span = Span::new(tokens[i].span.start, tokens[i + len - 1].span.end);
            let surface = text::slice(text, span).unwrap_or("");
            if let Some(label) = lexicons.gazetteer_label(surface) {
                entities.push(EntitySpan {
                    start: span.start,
                    end: span.end,
                    label: label.to_string(),
                });
                matched = len;
                break;
            }
        }
        if matched > 0 {
            claimed[i..i + matched].iter_mut().for_each(|c| *c = true);
            i += matched;
        } else {
            i += 1;
        }
    }

    // capitalized runs
    let is_cap = |claimed: &[bool], k: usize| {
        let t = &tokens[k];
        !claimed[k] && starts_upper(t.text) && t.text != "I"
    };
    let mut k = 0;
    while k < tokens.len() {
        if !is_cap(&claimed, k) {
            k += 1;
            continue;
        }
        let mut end = k + 1;
        while end < tokens.len()
            && is_cap(&claimed, end)
            && only_whitespace_between(text, &tokens[end - 1], &tokens[end])
        {
            end += 1;
        }
        let mut start = k;
        while start < end {
            let lower = tokens[start].text.to_lowercase();
            if NON_ENTITY_OPENERS.contains(&lower.as_str())
                || lexicons.pronouns.contains(&lower)
                || is_auxiliary(&lower)
            {
                start += 1;
            } else {
                break;
            }
        }
        if start < end && (end - start >= 2 || !tokens[start].sentence_initial) {
            entities.push(EntitySpan {
                start: tokens[start].span.start,
                end: tokens[end - 1].span.end,
                label: HEURISTIC_ENTITY_LABEL.to_string(),
            });
            claimed[start..end].iter_mut().for_each(|c| *c = true);
        }
        k = end;
    }

    let mut pronouns = Vec::new();
    for (idx, t) in tokens.iter().enumerate() {
        if !claimed[idx] && lexicons.pronouns.contains(&t.text.to_lowercase()) {
            pronouns.push(t.span);
            claimed[idx] = true;
        }
    }

    let mut verbs = Vec::new();
    for idx in 0..tokens.len() {
        if claimed[idx] {
            continue;
        }
        if is_verb(&tokens, idx, lexicons) {
            let t = &tokens[idx];
            verbs.push(VerbToken {
                start: t.span.start,
                end: t.span.end,
                tense: Some(lexicons.detect_tense(t.span, text).tense),
            });
            claimed[idx] = true;
        }
    }

    let mut adjectives = Vec::new();
    for (idx, t) in tokens.iter().enumerate() {
        if claimed[idx] {
            continue;
        }
        let lower = t.text.to_lowercase();
        let known = !lexicons.antonyms_of(&lower).is_empty();
        let suffix = lower.chars().count() >= 6
            && lower.chars().all(char::is_alphabetic)
            && ADJECTIVE_SUFFIXES.iter().any(|s| lower.ends_with(s));
        if known || suffix {
            adjectives.push(t.span);
        }
    }

    Ok(Annotations {
        entities,
        pronouns,
        verbs,
        adjectives,
    }
    .normalized())
}

fn nearest_non_adverb(tokens: &[Token<'_>], idx: usize) -> Option<String> {
    tokens[..idx]
        .iter()
        .rev()
        .take(TENSE_WINDOW)
        .map(|t| t.text.to_lowercase())
        .find(|w| !ADVERBS.contains(&w.as_str()))
}

fn next_non_adverb(tokens: &[Token<'_>], idx: usize) -> Option<String> {
    tokens[idx + 1..]
        .iter()
        .take(TENSE_WINDOW)
        .map(|t| t.text.to_lowercase())
        .find(|w| !ADVERBS.contains(&w.as_str()))
}

fn nearest_aux(tokens: &[Token<'_>], idx: usize) -> Option<AuxKind> {
    tokens[..idx]
        .iter()
        .rev()
        .take(TENSE_WINDOW)
        .find_map(|t| aux_kind(&t.text.to_lowercase()))
}

fn is_verb(tokens: &[Token<'_>], idx: usize, lex: &LexiconSet) -> bool {
    let lower = tokens[idx].text.to_lowercase();
    let verbs = &lex.verbs;
    let prev = nearest_non_adverb(tokens, idx);
    let prev = prev.as_deref();

    match lower.as_str() {
        "am" | "is" | "are" | "was" | "were" | "has" | "have" | "had" => {
            // auxiliary when another verb form follows
            let next = next_non_adverb(tokens, idx);
            return !next.is_some_and(|n| {
                n.ends_with("ing")
                    || n.ends_with("ed")
                    || n == "been"
                    || verbs.is_irregular_participle(&n)
            });
        }
        _ => {}
    }
    if is_auxiliary(&lower) || prev == Some("to") {
        return false;
    }
    if lower.ends_with("ing") {
        return nearest_aux(tokens, idx) == Some(AuxKind::Be);
    }
    let after_aux = matches!(nearest_aux(tokens, idx), Some(AuxKind::Have | AuxKind::Be));
    if verbs.is_irregular_past(&lower)
        || verbs.is_irregular_participle(&lower)
        || lower.ends_with("ed")
    {
        let known = verbs.is_irregular_past(&lower)
            || verbs.is_irregular_participle(&lower)
            || verbs
                .lemma_of_past(&lower)
                .is_some_and(|b| verbs.is_base(&b));
        if after_aux {
            return true;
        }
        return known
            && prev.is_some_and(|p| !DETERMINERS.contains(&p) && !PREPOSITIONS.contains(&p));
    }
    if verbs.is_base(&lower) {
        return prev.is_some_and(|p| {
            SUBJECT_PRONOUNS.contains(&p)
                || matches!(aux_kind(p), Some(AuxKind::Modal | AuxKind::Do))
        });
    }
    if lower.ends_with('s') && !lower.ends_with("ss") {
        let known = verbs
            .lemma_of_third(&lower)
            .is_some_and(|b| verbs.is_base(&b));
        return known
            && prev.is_some_and(|p| !DETERMINERS.contains(&p) && !PREPOSITIONS.contains(&p));
    }
    false
}

/// True when every `b ∈ antonyms(a)` also has `a ∈ antonyms(b)`.
pub fn antonyms_are_symmetric(map: &BTreeMap<String, Vec<String>>) -> bool {
    map.iter().all(|(a, bs)| {
        bs.iter()
            .all(|b| map.get(b).is_some_and(|back| back.contains(a)))
    })
}

/// All surface forms of the entities in `annotations`, grouped by label.
pub fn entity_surfaces(
    text: &str,
    annotations: &Annotations,
) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for e in &annotations.entities {
        if let Some(s) = text::slice(text, e.span()) {
            out.entry(e.label.clone())
                .or_default()
                .insert(s.to_string());
        }
    }
    out
}
