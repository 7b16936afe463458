//! Controlled factual-error injection into reference summaries.
//!
//! A [`WorkingSummary`] carries the current text together with its
//! annotations, shifted after every edit, and the regions already edited
//! (which are no longer eligible). [`apply_error`] performs one edit of a
//! given type; [`generate_diagnostic`] builds the full diagnostic dataset.

mod dataset;
pub mod negation;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Annotations, Document};
use crate::taggers::{self, LexiconSet};
use crate::text::{self, Span};

pub use dataset::{
    diagnostic_stats, generate_diagnostic, load_diagnostic, parse_diagnostic, DiagStatsRow,
    DiagStatsTable, DiagnosticDataset, DiagnosticHeader, DiagnosticInstance, LevelStat,
    DIAGNOSTIC_SCHEMA,
};
pub use negation::{negate_at, NegationEdit};

#[derive(Debug, Error)]
pub enum PerturbError {
    #[error("record {id:?} has no annotations")]
    Unannotated { id: String },
    #[error("{0}")]
    InvalidParameter(String),
    #[error("diagnostic dataset is empty")]
    EmptyDataset,
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line 1: expected header with schema {expected:?}")]
    Header { expected: &'static str },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
}

/// Factual error categories. Only the first five are injected; the last two
/// occur in human annotations only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorType {
    IntrinsicEntity,
    ExtrinsicEntity,
    Pronoun,
    Negation,
    Sentiment,
    FalseQuote,
    Other,
}

impl ErrorType {
    pub const INJECTABLE: [ErrorType; 5] = [
        ErrorType::IntrinsicEntity,
        ErrorType::ExtrinsicEntity,
        ErrorType::Pronoun,
        ErrorType::Negation,
        ErrorType::Sentiment,
    ];

    pub fn is_injectable(self) -> bool {
        !matches!(self, ErrorType::FalseQuote | ErrorType::Other)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorType::IntrinsicEntity => "intrinsic-entity",
            ErrorType::ExtrinsicEntity => "extrinsic-entity",
            ErrorType::Pronoun => "pronoun",
            ErrorType::Negation => "negation",
            ErrorType::Sentiment => "sentiment",
            ErrorType::FalseQuote => "false-quote",
            ErrorType::Other => "other",
        }
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Error-type families that diagnostic instances are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subset {
    Entity,
    NonEntity,
}

impl Subset {
    pub const ALL: [Subset; 2] = [Subset::Entity, Subset::NonEntity];

    pub fn error_types(self) -> &'static [ErrorType] {
        match self {
            Subset::Entity => &[
                ErrorType::IntrinsicEntity,
                ErrorType::ExtrinsicEntity,
                ErrorType::Pronoun,
            ],
            Subset::NonEntity => &[ErrorType::Negation, ErrorType::Sentiment],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Entity => "entity",
            Subset::NonEntity => "non-entity",
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One applied edit. `start`/`end` are codepoint offsets into the text as it
/// was right before this edit, so replaying the list in order reproduces the
/// transformed text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppliedError {
    pub error_type: ErrorType,
    pub start: usize,
    pub end: usize,
    pub original: String,
    pub replacement: String,
}

impl AppliedError {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

/// Replays `applied` on `reference`, checking each recorded original text.
pub fn replay(reference: &str, applied: &[AppliedError]) -> Result<String, String> {
    let mut text = reference.to_string();
    for (k, e) in applied.iter().enumerate() {
        match text::slice(&text, e.span()) {
            Some(s) if s == e.original => text = text::splice(&text, e.span(), &e.replacement),
            found => {
                return Err(format!(
                    "edit {k}: expected {:?} at {}..{}, found {found:?}",
                    e.original, e.start, e.end
                ))
            }
        }
    }
    Ok(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DictionaryScope {
    SingleDocument,
    CorpusWide,
}

/// Entity surface forms grouped by label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityDictionary {
    pub scope: DictionaryScope,
    pub entries: BTreeMap<String, BTreeSet<String>>,
}

impl EntityDictionary {
    pub fn get(&self, label: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(label)
    }

    pub fn is_superset_of(&self, other: &EntityDictionary) -> bool {
        other.entries.iter().all(|(label, forms)| {
            self.entries
                .get(label)
                .is_some_and(|mine| forms.is_subset(mine))
        })
    }
}

/// Collects the unique entity surface forms of `docs`. Single-document scope
/// requires exactly one document.
pub fn build_entity_dictionary(
    scope: DictionaryScope,
    docs: &[&Document],
) -> Result<EntityDictionary, PerturbError> {
    if scope == DictionaryScope::SingleDocument && docs.len() != 1 {
        return Err(PerturbError::InvalidParameter(format!(
            "single-document dictionary needs exactly one document, got {}",
            docs.len()
        )));
    }
    let mut entries: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for doc in docs {
        let ann = doc
            .annotations
            .as_ref()
            .ok_or_else(|| PerturbError::Unannotated { id: doc.id.clone() })?;
        for (label, forms) in taggers::entity_surfaces(&doc.text, ann) {
            entries.entry(label).or_default().extend(forms);
        }
    }
    Ok(EntityDictionary { scope, entries })
}

/// Everything an edit may consult besides the summary itself.
#[derive(Debug, Clone, Copy)]
pub struct ErrorContext<'a> {
    pub source: &'a Document,
    pub doc_dict: &'a EntityDictionary,
    pub corpus_dict: &'a EntityDictionary,
    pub lexicons: &'a LexiconSet,
}

/// A summary being transformed.
#[derive(Debug, Clone)]
pub struct WorkingSummary {
    text: String,
    annotations: Annotations,
    edited: Vec<Span>,
    applied: Vec<AppliedError>,
}

impl WorkingSummary {
    pub fn new(text: impl Into<String>, annotations: Annotations) -> Self {
        Self {
            text: text.into(),
            annotations,
            edited: Vec::new(),
            applied: Vec::new(),
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn annotations(&self) -> &Annotations {
        &self.annotations
    }

    pub fn applied(&self) -> &[AppliedError] {
        &self.applied
    }

    pub fn into_parts(self) -> (String, Vec<AppliedError>) {
        (self.text, self.applied)
    }

    fn is_free(&self, span: Span) -> bool {
        !self.edited.iter().any(|e| e.overlaps(&span))
    }

    fn commit(&mut self, error_type: ErrorType, span: Span, replacement: String) -> AppliedError {
        let original = text::slice(&self.text, span)
            .expect("edit span lies within the text")
            .to_string();
        let new_len = text::char_len(&replacement);
        let shift = |s: Span| -> Option<Span> {
            if s.end <= span.start {
                Some(s)
            } else if s.start >= span.end {
                Some(Span::new(
                    s.start - span.end + span.start + new_len,
                    s.end - span.end + span.start + new_len,
                ))
            } else {
                None
            }
        };
        let ann = &mut self.annotations;
        ann.entities.retain_mut(|e| match shift(e.span()) {
            Some(s) => {
                (e.start, e.end) = (s.start, s.end);
                true
            }
            None => false,
        });
        ann.verbs.retain_mut(|v| match shift(v.span()) {
            Some(s) => {
                (v.start, v.end) = (s.start, s.end);
                true
            }
            None => false,
        });
        ann.pronouns = ann.pronouns.iter().filter_map(|&s| shift(s)).collect();
        ann.adjectives = ann.adjectives.iter().filter_map(|&s| shift(s)).collect();
        self.edited = self.edited.iter().filter_map(|&s| shift(s)).collect();
        self.edited
            .push(Span::new(span.start, span.start + new_len));
        self.text = text::splice(&self.text, span, &replacement);
        let applied = AppliedError {
            error_type,
            start: span.start,
            end: span.end,
            original,
            replacement,
        };
        self.applied.push(applied.clone());
        applied
    }
}

/// A proposed edit on the current text.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Edit {
    span: Span,
    replacement: String,
}

/// Applies one error of `error_type` to `summary`. A random eligible-looking
/// target is drawn; if it admits no edit, one more target is drawn. Returns
/// `None` (leaving the summary untouched) when both attempts fail or the type
/// is not injectable.
pub fn apply_error<R: Rng + ?Sized>(
    summary: &mut WorkingSummary,
    error_type: ErrorType,
    ctx: &ErrorContext<'_>,
    rng: &mut R,
) -> Option<AppliedError> {
    if !error_type.is_injectable() {
        return None;
    }
    let targets = targets(summary, error_type);
    if targets.is_empty() {
        return None;
    }
    for _ in 0..2 {
        let target = targets[rng.random_range(0..targets.len())];
        if let Some(edit) = edit_for(summary, error_type, target, ctx, rng) {
            if edit.replacement.is_empty() || !summary.is_free(edit.span) {
                continue;
            }
            return Some(summary.commit(error_type, edit.span, edit.replacement));
        }
    }
    None
}

#[derive(Debug, Clone, Copy)]
struct Target {
    span: Span,
    index: usize,
}

fn targets(summary: &WorkingSummary, error_type: ErrorType) -> Vec<Target> {
    let ann = &summary.annotations;
    let spans: Vec<Span> = match error_type {
        ErrorType::IntrinsicEntity | ErrorType::ExtrinsicEntity => {
            ann.entities.iter().map(|e| e.span()).collect()
        }
        ErrorType::Pronoun => ann.pronouns.clone(),
        ErrorType::Negation => ann.verbs.iter().map(|v| v.span()).collect(),
        ErrorType::Sentiment => ann
            .adjectives
            .iter()
            .copied()
            .filter(|a| !ann.entities.iter().any(|e| e.span().overlaps(a)))
            .collect(),
        ErrorType::FalseQuote | ErrorType::Other => Vec::new(),
    };
    spans
        .into_iter()
        .enumerate()
        .filter(|(_, s)| summary.is_free(*s))
        .map(|(index, span)| Target { span, index })
        .collect()
}

fn edit_for<R: Rng + ?Sized>(
    summary: &WorkingSummary,
    error_type: ErrorType,
    target: Target,
    ctx: &ErrorContext<'_>,
    rng: &mut R,
) -> Option<Edit> {
    let text = summary.text.as_str();
    let original = text::slice(text, target.span)?;
    let replacement = match error_type {
        ErrorType::IntrinsicEntity | ErrorType::ExtrinsicEntity => {
            let label = summary
                .annotations
                .entities
                .get(target.index)?
                .label
                .as_str();
            let options = entity_candidates(error_type, original, label, ctx);
            pick(&options, rng)?
        }
        ErrorType::Pronoun => {
            let lex = &ctx.lexicons.pronouns;
            let source = lex.group_index(&original.to_lowercase())?;
            let options: Vec<String> = (0..lex.groups().len())
                .filter(|&g| g != source)
                .filter_map(|g| lex.map_to_group(text, target.span, g))
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            pick(&options, rng)?
        }
        ErrorType::Negation => {
            let tense = summary
                .annotations
                .verbs
                .get(target.index)
                .and_then(|v| v.tense);
            let e = negate_at(text, target.span, tense, &ctx.lexicons.verbs)?;
            return Some(Edit {
                span: e.span,
                replacement: e.replacement,
            });
        }
        ErrorType::Sentiment => {
            let antonym = taggers::antonym(original, ctx.lexicons, rng)?;
            text::match_case(original, &antonym)
        }
        ErrorType::FalseQuote | ErrorType::Other => return None,
    };
    (replacement != original).then_some(Edit {
        span: target.span,
        replacement,
    })
}

fn pick<R: Rng + ?Sized>(options: &[String], rng: &mut R) -> Option<String> {
    if options.is_empty() {
        None
    } else {
        Some(options[rng.random_range(0..options.len())].clone())
    }
}

/// Replacement candidates for an entity edit, in sorted order. Intrinsic
/// candidates come from the source document's dictionary; extrinsic ones from
/// the corpus-wide dictionary and must not occur in the source text
/// (case-insensitively).
pub fn entity_candidates(
    error_type: ErrorType,
    original: &str,
    label: &str,
    ctx: &ErrorContext<'_>,
) -> Vec<String> {
    match error_type {
        ErrorType::IntrinsicEntity => ctx
            .doc_dict
            .get(label)
            .map(|forms| forms.iter().filter(|f| *f != original).cloned().collect())
            .unwrap_or_default(),
        ErrorType::ExtrinsicEntity => {
            let source = ctx.source.text.to_lowercase();
            ctx.corpus_dict
                .get(label)
                .map(|forms| {
                    forms
                        .iter()
                        .filter(|f| *f != original && !source.contains(&f.to_lowercase()))
                        .cloned()
                        .collect()
                })
                .unwrap_or_default()
        }
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Domain;
    use crate::rng;
    use crate::taggers::annotate;

    const SOURCE: &str = "The Irish Taoiseach Leo Varadkar welcomed the Canadian Prime Minister Justin Trudeau to Dublin on Monday. He said the visit was a powerful sign of friendship.";
    const SUMMARY: &str = "Irish Taoiseach (PM) Leo Varadkar has engaged in some \"sock diplomacy\" in his first meeting with Canadian Prime Minister Justin Trudeau in Dublin.";

    fn doc(id: &str, text: &str, lex: &LexiconSet) -> Document {
        Document {
            id: id.into(),
            text: text.into(),
            domain: Domain::ShortNews,
            annotations: Some(annotate(text, lex).unwrap()),
        }
    }

    fn entity_span(summary: &WorkingSummary, surface: &str) -> Target {
        let (index, e) = summary
            .annotations
            .entities
            .iter()
            .enumerate()
            .find(|(_, e)| text::slice(&summary.text, e.span()) == Some(surface))
            .unwrap();
        Target {
            span: e.span(),
            index,
        }
    }

    #[test]
    fn error_type_names() {
        let json = serde_json::to_string(&ErrorType::IntrinsicEntity).unwrap();
        assert_eq!(json, "\"intrinsic-entity\"");
        assert!(!ErrorType::FalseQuote.is_injectable());
        assert_eq!(
            ErrorType::INJECTABLE
                .iter()
                .filter(|t| t.is_injectable())
                .count(),
            5
        );
        assert_eq!(
            serde_json::to_string(&Subset::NonEntity).unwrap(),
            "\"non-entity\""
        );
    }

    #[test]
    fn dictionary_from_table_three_sentence() {
        let lex = LexiconSet::bundled();
        let d = doc("d", SUMMARY, &lex);
        let dict = build_entity_dictionary(DictionaryScope::SingleDocument, &[&d]).unwrap();
        assert_eq!(
            dict.get("NORP").unwrap(),
            &BTreeSet::from(["Irish".to_string(), "Canadian".to_string()])
        );
        assert_eq!(dict.get("GPE").unwrap().len(), 1);
        let only_gazetteer: Vec<_> = dict.entries.keys().filter(|k| *k != "MISC").collect();
        assert_eq!(only_gazetteer, vec!["GPE", "NORP"]);

        let empty = build_entity_dictionary(DictionaryScope::CorpusWide, &[]).unwrap();
        assert!(empty.entries.is_empty());
        let unannotated = Document {
            annotations: None,
            ..d.clone()
        };
        assert!(matches!(
            build_entity_dictionary(DictionaryScope::CorpusWide, &[&unannotated]),
            Err(PerturbError::Unannotated { .. })
        ));
    }

    #[test]
    fn intrinsic_swap_reproduces_table_three() {
        let lex = LexiconSet::bundled();
        let source = doc("d", SOURCE, &lex);
        let dict = build_entity_dictionary(DictionaryScope::SingleDocument, &[&source]).unwrap();
        let ctx = ErrorContext {
            source: &source,
            doc_dict: &dict,
            corpus_dict: &dict,
            lexicons: &lex,
        };
        let mut w = WorkingSummary::new(SUMMARY, annotate(SUMMARY, &lex).unwrap());
        let mut r = rng::seeded(0);
        for surface in ["Irish", "Canadian"] {
            let target = entity_span(&w, surface);
            let edit = edit_for(&w, ErrorType::IntrinsicEntity, target, &ctx, &mut r).unwrap();
            w.commit(ErrorType::IntrinsicEntity, edit.span, edit.replacement);
        }
        assert!(w.text().starts_with("Canadian Taoiseach (PM) Leo Varadkar"));
        assert!(w
            .text()
            .contains("with Irish Prime Minister Justin Trudeau"));
        assert_eq!(replay(SUMMARY, w.applied()).unwrap(), w.text());
    }

    #[test]
    fn negation_on_table_three_sentence() {
        let lex = LexiconSet::bundled();
        let source = doc("d", SOURCE, &lex);
        let dict = build_entity_dictionary(DictionaryScope::SingleDocument, &[&source]).unwrap();
        let ctx = ErrorContext {
            source: &source,
            doc_dict: &dict,
            corpus_dict: &dict,
            lexicons: &lex,
        };
        let mut w = WorkingSummary::new(SUMMARY, annotate(SUMMARY, &lex).unwrap());
        let e = apply_error(&mut w, ErrorType::Negation, &ctx, &mut rng::seeded(1)).unwrap();
        assert_eq!(e.original, "has engaged");
        assert!(w.text().contains("has not engaged in"));
    }

    #[test]
    fn pronoun_and_sentiment() {
        let lex = LexiconSet::bundled();
        let source = doc("d", SOURCE, &lex);
        let dict = build_entity_dictionary(DictionaryScope::SingleDocument, &[&source]).unwrap();
        let ctx = ErrorContext {
            source: &source,
            doc_dict: &dict,
            corpus_dict: &dict,
            lexicons: &lex,
        };
        let text = "He described it as a powerful sign";
        let mut w = WorkingSummary::new(text, annotate(text, &lex).unwrap());
        let e = apply_error(&mut w, ErrorType::Sentiment, &ctx, &mut rng::seeded(2)).unwrap();
        assert_eq!(
            (e.original.as_str(), e.replacement.as_str()),
            ("powerful", "weak")
        );
        let e = apply_error(&mut w, ErrorType::Pronoun, &ctx, &mut rng::seeded(2)).unwrap();
        assert_ne!(e.original, e.replacement);
        assert_eq!(replay(text, w.applied()).unwrap(), w.text());
    }

    #[test]
    fn no_entities_means_no_entity_errors() {
        let lex = LexiconSet::bundled();
        let text = "Warm, humorous, gutsy, sparky, soulful, determined and fun.";
        let source = doc("d", "Some source text about a show.", &lex);
        let dict = build_entity_dictionary(DictionaryScope::SingleDocument, &[&source]).unwrap();
        let ctx = ErrorContext {
            source: &source,
            doc_dict: &dict,
            corpus_dict: &dict,
            lexicons: &lex,
        };
        let mut w = WorkingSummary::new(text, annotate(text, &lex).unwrap());
        for t in [
            ErrorType::IntrinsicEntity,
            ErrorType::ExtrinsicEntity,
            ErrorType::Negation,
        ] {
            assert!(apply_error(&mut w, t, &ctx, &mut rng::seeded(5)).is_none());
        }
        assert_eq!(w.text(), text);
        assert!(w.applied().is_empty());
        assert!(apply_error(&mut w, ErrorType::FalseQuote, &ctx, &mut rng::seeded(5)).is_none());
    }

    #[test]
    fn extrinsic_candidates_avoid_source() {
        let lex = LexiconSet::bundled();
        let source = doc("d", SOURCE, &lex);
        let other = doc(
            "e",
            "Officials in Paris and Berlin met French and German envoys.",
            &lex,
        );
        let single = build_entity_dictionary(DictionaryScope::SingleDocument, &[&source]).unwrap();
        let corpus =
            build_entity_dictionary(DictionaryScope::CorpusWide, &[&source, &other]).unwrap();
        assert!(corpus.is_superset_of(&single));
        let ctx = ErrorContext {
            source: &source,
            doc_dict: &single,
            corpus_dict: &corpus,
            lexicons: &lex,
        };
        let c = entity_candidates(ErrorType::ExtrinsicEntity, "Dublin", "GPE", &ctx);
        assert_eq!(c, vec!["Berlin", "Paris"]);
        let c = entity_candidates(ErrorType::IntrinsicEntity, "Irish", "NORP", &ctx);
        assert_eq!(c, vec!["Canadian"]);
    }

    #[test]
    fn edited_regions_become_ineligible() {
        let lex = LexiconSet::bundled();
        let text = "It is good.";
        let source = doc("d", SOURCE, &lex);
        let dict = build_entity_dictionary(DictionaryScope::SingleDocument, &[&source]).unwrap();
        let ctx = ErrorContext {
            source: &source,
            doc_dict: &dict,
            corpus_dict: &dict,
            lexicons: &lex,
        };
        let mut w = WorkingSummary::new(text, annotate(text, &lex).unwrap());
        let mut r = rng::seeded(9);
        assert!(apply_error(&mut w, ErrorType::Negation, &ctx, &mut r).is_some());
        assert_eq!(w.text(), "It is not good.");
        assert!(apply_error(&mut w, ErrorType::Negation, &ctx, &mut r).is_none());
        assert!(apply_error(&mut w, ErrorType::Sentiment, &ctx, &mut r).is_some());
        let swapped = w.applied()[1].replacement.clone();
        assert!(lex.antonyms_of("good").contains(&swapped));
        assert_eq!(w.text(), format!("It is not {swapped}."));
        assert_eq!(replay(text, w.applied()).unwrap(), w.text());
    }
}
