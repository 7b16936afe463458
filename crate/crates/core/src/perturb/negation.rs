//! Rule-based verb negation by inserting or removing "not".
//!
//! * copula: "is" ↔ "is not"
//! * auxiliary (have, be, modal, do): "has engaged" ↔ "has not engaged"
//! * do-support: "agree" ↔ "do not agree", "agrees" ↔ "does not agree",
//!   "agreed" ↔ "did not agree"
//!
//! Applying the edit twice to the same verb restores the original text.

use crate::corpus::Tense;
use crate::taggers::{aux_kind, detect_tense_with, AuxKind, VerbLexicon, TENSE_WINDOW};
use crate::text::{self, Span, Token};

const COPULA: &[&str] = &["am", "is", "are", "was", "were"];

// Words that may sit between an auxiliary and its verb.
const INTERVENING: &[&str] = &[
    "not",
    "also",
    "never",
    "still",
    "just",
    "already",
    "recently",
    "reportedly",
    "allegedly",
    "always",
    "often",
    "now",
    "really",
];

/// One negation edit: replace `span` of the input text with `replacement`.
/// `verb_span_after` locates the verb in the edited text so the edit can be
/// applied again.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegationEdit {
    pub span: Span,
    pub replacement: String,
    pub verb_span_after: Span,
}

impl NegationEdit {
    pub fn apply(&self, text: &str) -> String {
        text::splice(text, self.span, &self.replacement)
    }
}

fn slice(text: &str, start: usize, end: usize) -> &str {
    text::slice(text, Span::new(start, end)).unwrap_or("")
}

fn edit(
    text: &str,
    span: Span,
    replacement: String,
    verb_in_replacement: Span,
) -> Option<NegationEdit> {
    if slice(text, span.start, span.end) == replacement {
        return None;
    }
    Some(NegationEdit {
        span,
        verb_span_after: Span::new(
            span.start + verb_in_replacement.start,
            span.start + verb_in_replacement.end,
        ),
        replacement,
    })
}

/// Negates (or un-negates) the verb at `verb_span`. `tense` overrides the
/// detected tense when the choice of do-support auxiliary is needed. Returns
/// `None` when no rule applies.
pub fn negate_at(
    text: &str,
    verb_span: Span,
    tense: Option<Tense>,
    verbs: &VerbLexicon,
) -> Option<NegationEdit> {
    let tokens = text::word_tokens(text);
    let vi = tokens.iter().position(|t| t.span == verb_span)?;
    let verb = &tokens[vi];
    let lower = verb.text.to_lowercase();

    if COPULA.contains(&lower.as_str()) {
        return copula(text, &tokens, vi);
    }
    if let Some(ai) = find_aux(&tokens, vi) {
        return with_aux(text, &tokens, ai, vi, verbs);
    }
    if aux_kind(&lower).is_some() || (vi > 0 && tokens[vi - 1].text.eq_ignore_ascii_case("not")) {
        return None;
    }
    let tense = tense.unwrap_or_else(|| detect_tense_with(verb_span, text, verbs).tense);
    do_support(verb, &lower, tense, verbs)
}

fn copula(text: &str, tokens: &[Token<'_>], vi: usize) -> Option<NegationEdit> {
    let verb = &tokens[vi];
    let vlen = verb.span.len();
    match tokens.get(vi + 1) {
        Some(next) if next.text.eq_ignore_ascii_case("not") => {
            let span = Span::new(verb.span.start, next.span.end);
            edit(text, span, verb.text.to_string(), Span::new(0, vlen))
        }
        _ => edit(
            text,
            verb.span,
            format!("{} not", verb.text),
            Span::new(0, vlen),
        ),
    }
}

// Nearest auxiliary within the window, separated from the verb only by
// adverbs or "not".
fn find_aux(tokens: &[Token<'_>], vi: usize) -> Option<usize> {
    let mut k = vi;
    for _ in 0..TENSE_WINDOW {
        k = k.checked_sub(1)?;
        let lower = tokens[k].text.to_lowercase();
        if aux_kind(&lower).is_some() {
            return Some(k);
        }
        if !INTERVENING.contains(&lower.as_str()) {
            return None;
        }
    }
    None
}

fn with_aux(
    text: &str,
    tokens: &[Token<'_>],
    ai: usize,
    vi: usize,
    verbs: &VerbLexicon,
) -> Option<NegationEdit> {
    let aux = &tokens[ai];
    let verb = &tokens[vi];
    let span = Span::new(aux.span.start, verb.span.end);
    let not_idx = (ai + 1..vi).find(|&k| tokens[k].text.eq_ignore_ascii_case("not"));
    let aux_lower = aux.text.to_lowercase();

    let replacement = match not_idx {
        None => format!(
            "{} not{}",
            aux.text,
            slice(text, aux.span.end, verb.span.end)
        ),
        Some(ni) if aux_kind(&aux_lower) == Some(AuxKind::Do) => {
            // "does not agree" → "agrees"; adverbs in between would not
            // survive a second negation, so those are left alone
            if ni + 1 != vi {
                return None;
            }
            let base = verb.text.to_lowercase();
            let inflected = match aux_lower.as_str() {
                "does" => verbs.third_person(&base),
                "did" => verbs.past(&base),
                _ => base,
            };
            text::match_case(aux.text, &inflected)
        }
        Some(ni) => format!(
            "{}{}",
            slice(text, aux.span.start, tokens[ni].span.start).trim_end(),
            slice(text, tokens[ni].span.end, verb.span.end)
        ),
    };
    let len = text::char_len(&replacement);
    let vlen = text::char_len(replacement.split_whitespace().last().unwrap_or(""));
    edit(text, span, replacement, Span::new(len - vlen, len))
}

fn do_support(
    verb: &Token<'_>,
    lower: &str,
    tense: Tense,
    verbs: &VerbLexicon,
) -> Option<NegationEdit> {
    let (aux, base) = match tense {
        Tense::Past => {
            let base = verbs.lemma_of_past(lower)?;
            (verbs.past(&base) == lower).then_some(("did", base))?
        }
        Tense::PresentSimpleThird => {
            let base = verbs.lemma_of_third(lower)?;
            (verbs.third_person(&base) == lower).then_some(("does", base))?
        }
        Tense::PresentSimple => ("do", lower.to_string()),
        _ => return None,
    };
    let aux = text::match_case(verb.text, aux);
    let replacement = format!("{aux} not {base}");
    let len = text::char_len(&replacement);
    let vlen = text::char_len(&base);
    let span = verb.span;
    Some(NegationEdit {
        span,
        verb_span_after: Span::new(span.start + len - vlen, span.start + len),
        replacement,
    })
}
