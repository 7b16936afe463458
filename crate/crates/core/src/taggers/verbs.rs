//! Verb lexicon, inflection rules and rule-based tense detection.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::Tense;
use crate::text::{self, Span};

const BUNDLED_VERBS: &str = include_str!("../../data/verbs.txt");
const IRREGULAR_VERBS: &str = include_str!("../../data/irregular_verbs.tsv");

pub const BE_FORMS: &[&str] = &["am", "is", "are", "was", "were", "be", "been", "being"];
pub const HAVE_FORMS: &[&str] = &["has", "have", "had", "having"];
pub const DO_FORMS: &[&str] = &["do", "does", "did"];
pub const MODALS: &[&str] = &[
    "will", "would", "can", "could", "may", "might", "shall", "should", "must",
];

pub fn is_auxiliary(lower: &str) -> bool {
    BE_FORMS.contains(&lower)
        || HAVE_FORMS.contains(&lower)
        || DO_FORMS.contains(&lower)
        || MODALS.contains(&lower)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuxKind {
    Be,
    Have,
    Do,
    Modal,
}

pub fn aux_kind(lower: &str) -> Option<AuxKind> {
    if BE_FORMS.contains(&lower) {
        Some(AuxKind::Be)
    } else if HAVE_FORMS.contains(&lower) {
        Some(AuxKind::Have)
    } else if DO_FORMS.contains(&lower) {
        Some(AuxKind::Do)
    } else if MODALS.contains(&lower) {
        Some(AuxKind::Modal)
    } else {
        None
    }
}

#[derive(Debug, Clone)]
struct Irregular {
    past: String,
    participle: String,
}

/// Base-form verb list plus the irregular inflection table.
#[derive(Debug, Clone)]
pub struct VerbLexicon {
    bases: BTreeSet<String>,
    irregular: BTreeMap<String, Irregular>,
    past_to_base: BTreeMap<String, String>,
    participle_to_base: BTreeMap<String, String>,
}

impl VerbLexicon {
    pub fn bundled() -> Self {
        Self::from_list(BUNDLED_VERBS)
    }

    /// No base forms; the irregular table is always present since it encodes
    /// morphology rather than vocabulary.
    pub fn empty() -> Self {
        Self::from_list("")
    }

    pub fn from_list(list: &str) -> Self {
        let bases = list
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        let mut irregular = BTreeMap::new();
        let mut past_to_base = BTreeMap::new();
        let mut participle_to_base = BTreeMap::new();
        for line in IRREGULAR_VERBS.lines().filter(|l| !l.starts_with('#')) {
            let cols: Vec<&str> = line.split('\t').collect();
            if let [base, past, participle] = cols[..] {
                past_to_base
                    .entry(past.to_string())
                    .or_insert(base.to_string());
                participle_to_base
                    .entry(participle.to_string())
                    .or_insert(base.to_string());
                irregular.insert(
                    base.to_string(),
                    Irregular {
                        past: past.to_string(),
                        participle: participle.to_string(),
                    },
                );
            }
        }
        Self {
            bases,
            irregular,
            past_to_base,
            participle_to_base,
        }
    }

    pub fn is_base(&self, lower: &str) -> bool {
        self.bases.contains(lower) || self.irregular.contains_key(lower)
    }

    pub fn is_irregular_past(&self, lower: &str) -> bool {
        self.past_to_base.contains_key(lower)
    }

    pub fn is_irregular_participle(&self, lower: &str) -> bool {
        self.participle_to_base.contains_key(lower)
    }

    pub fn third_person(&self, base: &str) -> String {
        match base {
            "be" => return "is".into(),
            "have" => return "has".into(),
            _ => {}
        }
        if ["s", "sh", "ch", "x", "z", "o"]
            .iter()
            .any(|e| base.ends_with(e))
        {
            format!("{base}es")
        } else if ends_consonant_y(base) {
            format!("{}ies", &base[..base.len() - 1])
        } else {
            format!("{base}s")
        }
    }

    pub fn past(&self, base: &str) -> String {
        if let Some(irr) = self.irregular.get(base) {
            return irr.past.clone();
        }
        regular_past(base)
    }

    pub fn participle(&self, base: &str) -> String {
        if let Some(irr) = self.irregular.get(base) {
            return irr.participle.clone();
        }
        regular_past(base)
    }

    /// Base form of a past-tense or participle form such that re-inflecting
    /// the base reproduces `form` exactly.
    pub fn lemma_of_past(&self, form: &str) -> Option<String> {
        if let Some(b) = self.past_to_base.get(form) {
            return Some(b.clone());
        }
        if let Some(b) = self.participle_to_base.get(form) {
            return Some(b.clone());
        }
        let mut candidates = Vec::new();
        if let Some(stem) = form.strip_suffix("ed") {
            candidates.push(stem.to_string());
            if let Some(s) = form.strip_suffix('d') {
                candidates.push(s.to_string());
            }
            if let Some(s) = form.strip_suffix("ied") {
                candidates.push(format!("{s}y"));
            }
            let chars: Vec<char> = stem.chars().collect();
            if chars.len() >= 2 && chars[chars.len() - 1] == chars[chars.len() - 2] {
                candidates.push(chars[..chars.len() - 1].iter().collect());
            }
        }
        self.pick(candidates, |c| {
            self.past(c) == form || self.participle(c) == form
        })
    }

    /// Base form of a third-person singular form, verified by re-inflection.
    pub fn lemma_of_third(&self, form: &str) -> Option<String> {
        match form {
            "is" => return Some("be".into()),
            "has" => return Some("have".into()),
            _ => {}
        }
        let mut candidates = Vec::new();
        if let Some(s) = form.strip_suffix('s') {
            candidates.push(s.to_string());
        }
        if let Some(s) = form.strip_suffix("es") {
            candidates.push(s.to_string());
        }
        if let Some(s) = form.strip_suffix("ies") {
            candidates.push(format!("{s}y"));
        }
        self.pick(candidates, |c| self.third_person(c) == form)
    }

    fn pick<F: Fn(&str) -> bool>(&self, candidates: Vec<String>, ok: F) -> Option<String> {
        let valid: Vec<String> = candidates
            .into_iter()
            .filter(|c| !c.is_empty() && ok(c))
            .collect();
        valid
            .iter()
            .find(|c| self.is_base(c))
            .or(valid.first())
            .cloned()
    }

    /// True when the word is a known verb in some inflected form.
    pub fn is_known_form(&self, lower: &str) -> bool {
        self.is_base(lower)
            || self.is_irregular_past(lower)
            || self.is_irregular_participle(lower)
            || self.lemma_of_past(lower).is_some_and(|b| self.is_base(&b))
            || self.lemma_of_third(lower).is_some_and(|b| self.is_base(&b))
            || lower
                .strip_suffix("ing")
                .is_some_and(|s| self.is_base(s) || self.is_base(&format!("{s}e")))
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u')
}

fn ends_consonant_y(w: &str) -> bool {
    let chars: Vec<char> = w.chars().collect();
    chars.len() >= 2 && chars[chars.len() - 1] == 'y' && !is_vowel(chars[chars.len() - 2])
}

fn regular_past(base: &str) -> String {
    if base.ends_with('e') {
        return format!("{base}d");
    }
    if ends_consonant_y(base) {
        return format!("{}ied", &base[..base.len() - 1]);
    }
    let chars: Vec<char> = base.chars().collect();
    let vowels = chars.iter().filter(|c| is_vowel(**c)).count();
    let n = chars.len();
    if vowels == 1
        && n >= 3
        && !is_vowel(chars[n - 1])
        && is_vowel(chars[n - 2])
        && !is_vowel(chars[n - 3])
        && !matches!(chars[n - 1], 'w' | 'x' | 'y')
    {
        return format!("{base}{}ed", chars[n - 1]);
    }
    format!("{base}ed")
}

/// Result of tense detection; `low_confidence` marks the present-simple
/// fallback for words the rules do not recognise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TenseGuess {
    pub tense: Tense,
    pub low_confidence: bool,
}

impl TenseGuess {
    fn sure(tense: Tense) -> Self {
        Self {
            tense,
            low_confidence: false,
        }
    }
}

/// Number of tokens to the left of a verb that tense detection may inspect.
pub const TENSE_WINDOW: usize = 3;

/// Up to `TENSE_WINDOW` lowercase tokens ending right before `span`, nearest
/// first.
pub(crate) fn left_window(text: &str, span: Span) -> Vec<String> {
    let tokens = text::word_tokens(text);
    tokens
        .iter()
        .filter(|t| t.span.end <= span.start)
        .rev()
        .take(TENSE_WINDOW)
        .map(|t| t.text.to_lowercase())
        .collect()
}

fn looks_participle(lex: &VerbLexicon, w: &str) -> bool {
    w.ends_with("ed")
        || w.ends_with("en")
        || lex.is_irregular_participle(w)
        || lex.is_irregular_past(w)
}

/// Predicts the tense of the verb at `verb_span` from its suffix and the
/// nearest auxiliary among the three preceding tokens.
pub fn detect_tense(verb_span: Span, text: &str, lex: &VerbLexicon) -> TenseGuess {
    let word = text::slice(text, verb_span).unwrap_or("").to_lowercase();
    let window = left_window(text, verb_span);

    // main-verb be/have
    match word.as_str() {
        "is" | "has" => return TenseGuess::sure(Tense::PresentSimpleThird),
        "am" | "are" | "have" => return TenseGuess::sure(Tense::PresentSimple),
        "was" | "were" | "had" => return TenseGuess::sure(Tense::Past),
        _ => {}
    }

    if let Some(aux) = window.iter().find(|w| aux_kind(w).is_some()) {
        match aux_kind(aux).expect("found above") {
            AuxKind::Have if looks_participle(lex, &word) => {
                return TenseGuess::sure(Tense::ParticipleAfterHave)
            }
            AuxKind::Modal => return TenseGuess::sure(Tense::InfinitiveAfterModal),
            AuxKind::Be if word.ends_with("ing") => return TenseGuess::sure(Tense::Progressive),
            AuxKind::Do => {
                return TenseGuess::sure(match aux.as_str() {
                    "does" => Tense::PresentSimpleThird,
                    "did" => Tense::Past,
                    _ => Tense::PresentSimple,
                })
            }
            AuxKind::Be => {
                // passive: tense carried by the auxiliary
                return TenseGuess::sure(match aux.as_str() {
                    "is" => Tense::PresentSimpleThird,
                    "was" | "were" => Tense::Past,
                    _ => Tense::PresentSimple,
                });
            }
            AuxKind::Have => {}
        }
    }

    if word.ends_with("ing") {
        return TenseGuess::sure(Tense::Progressive);
    }
    if lex.is_irregular_past(&word) || word.ends_with("ed") {
        return TenseGuess::sure(Tense::Past);
    }
    if lex.is_base(&word) {
        return TenseGuess::sure(Tense::PresentSimple);
    }
    if word.ends_with('s') && !word.ends_with("ss") {
        let known = lex.lemma_of_third(&word).is_some_and(|b| lex.is_base(&b));
        return TenseGuess {
            tense: Tense::PresentSimpleThird,
            low_confidence: !known,
        };
    }
    TenseGuess {
        tense: Tense::PresentSimple,
        low_confidence: true,
    }
}
