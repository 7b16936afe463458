//! Corpus ingestion, descriptive statistics and evaluation-set sampling.
//!
//! A corpus file is newline-delimited JSON. The first line is a header
//! `{"schema":"factgauge.corpus/v1"}`; each following line is either a
//! document record
//!
//! ```text
//! {"id":..,"source_text":..,"reference_summary":..,"domain":..,"annotations":{"source":{..},"summary":{..}}}
//! ```
//!
//! or an extra summary record (generated summaries, for example) that points
//! at a document:
//!
//! ```text
//! {"id":..,"doc_id":..,"kind":"generated","text":..,"annotations":{..}}
//! ```
//!
//! All annotation spans are unicode codepoint offsets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::index;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::perturb::ErrorType;
use crate::rng;
use crate::taggers::PronounLexicon;
use crate::text::{self, Span};

pub const CORPUS_SCHEMA: &str = "factgauge.corpus/v1";
pub const HUMAN_SCHEMA: &str = "factgauge.human/v1";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no records")]
    NoRecords,
    #[error("line 1: expected header with schema {expected:?}, found {found}")]
    Header {
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: summary {summary_id:?} references unknown document {doc_id:?}")]
    DanglingReference {
        line: usize,
        summary_id: String,
        doc_id: String,
    },
    #[error("record {id:?} has no annotations")]
    MissingAnnotations { id: String },
    #[error("record {id:?}: {message}")]
    InvalidAnnotation { id: String, message: String },
    #[error("line {line}: {message}")]
    InvalidRecord { line: usize, message: String },
    #[error("corpus is empty")]
    Empty,
    #[error("cannot sample {requested} documents from a corpus of {available}")]
    SampleTooLarge { requested: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    ShortNews,
    LongNews,
    Dialogue,
    Other,
}

impl Domain {
    pub fn as_str(&self) -> &'static str {
        match self {
            Domain::ShortNews => "short-news",
            Domain::LongNews => "long-news",
            Domain::Dialogue => "dialogue",
            Domain::Other => "other",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Verb tense categories used by the negation rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tense {
    #[serde(rename = "present-simple-3rd")]
    PresentSimpleThird,
    PresentSimple,
    Past,
    #[serde(rename = "gerund-progressive")]
    Progressive,
    InfinitiveAfterModal,
    ParticipleAfterHave,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
}

impl EntitySpan {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbToken {
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tense: Option<Tense>,
}

impl VerbToken {
    pub fn span(&self) -> Span {
        Span::new(self.start, self.end)
    }
}

/// Linguistic annotations over one text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotations {
    #[serde(default)]
    pub entities: Vec<EntitySpan>,
    #[serde(default)]
    pub pronouns: Vec<Span>,
    #[serde(default)]
    pub verbs: Vec<VerbToken>,
    #[serde(default)]
    pub adjectives: Vec<Span>,
}

impl Annotations {
    /// Checks bounds, `start < end`, and that entity spans do not overlap.
    pub fn validate(&self, text: &str) -> Result<(), String> {
        let len = text::char_len(text);
        let check = |kind: &str, s: Span| -> Result<(), String> {
            if s.start >= s.end {
                return Err(format!(
                    "{kind} span {}..{} is empty or inverted",
                    s.start, s.end
                ));
            }
            if s.end > len {
                return Err(format!(
                    "{kind} span {}..{} exceeds text length {len}",
                    s.start, s.end
                ));
            }
            Ok(())
        };
        for e in &self.entities {
            check("entity", e.span())?;
        }
        for &p in &self.pronouns {
            check("pronoun", p)?;
        }
        for v in &self.verbs {
            check("verb", v.span())?;
        }
        for &a in &self.adjectives {
            check("adjective", a)?;
        }
        let mut spans: Vec<Span> = self.entities.iter().map(EntitySpan::span).collect();
        spans.sort();
        for pair in spans.windows(2) {
            if pair[0].overlaps(&pair[1]) {
                return Err(format!(
                    "entity spans {}..{} and {}..{} overlap",
                    pair[0].start, pair[0].end, pair[1].start, pair[1].end
                ));
            }
        }
        Ok(())
    }

    /// Canonical order: every list sorted by position.
    pub fn normalized(mut self) -> Self {
        self.entities.sort_by_key(|e| (e.start, e.end));
        self.pronouns.sort();
        self.verbs.sort_by_key(|v| (v.start, v.end));
        self.adjectives.sort();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub domain: Domain,
    pub annotations: Option<Annotations>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SummaryKind {
    Reference,
    Generated,
    Transformed,
    RandomBaseline,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub id: String,
    pub doc_id: String,
    pub text: String,
    pub kind: SummaryKind,
    pub annotations: Option<Annotations>,
}

/// Human factuality judgement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Judgement {
    Yes,
    No,
    NotSure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanAnnotationRecord {
    pub summary_id: String,
    pub doc_id: String,
    pub error_counts: BTreeMap<ErrorType, u32>,
    pub total_level: u32,
    pub judged_factual: Judgement,
}

impl HumanAnnotationRecord {
    pub fn validate(&self) -> Result<(), String> {
        let sum: u32 = self.error_counts.values().sum();
        if sum != self.total_level {
            return Err(format!(
                "total_level {} does not equal the sum of error counts {sum}",
                self.total_level
            ));
        }
        if self.judged_factual == Judgement::Yes && self.total_level != 0 {
            return Err("judged factual but total_level is nonzero".into());
        }
        Ok(())
    }

    /// Error level after dropping the excluded error types from the count.
    pub fn level_excluding(&self, excluded: &BTreeSet<ErrorType>) -> u32 {
        self.error_counts
            .iter()
            .filter(|(t, _)| !excluded.contains(t))
            .map(|(_, c)| *c)
            .sum()
    }
}

/// An immutable set of documents with their reference summaries and any
/// additional summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    label: String,
    documents: Vec<Document>,
    summaries: Vec<SummaryRecord>,
    doc_index: HashMap<String, usize>,
    reference_index: HashMap<String, usize>,
}

impl Corpus {
    /// Builds a corpus, checking id uniqueness, referential integrity and that
    /// each document has exactly one reference summary.
    pub fn new(
        label: impl Into<String>,
        documents: Vec<Document>,
        summaries: Vec<SummaryRecord>,
    ) -> Result<Self, CorpusError> {
        let mut doc_index = HashMap::new();
        for (i, d) in documents.iter().enumerate() {
            if d.id.is_empty() {
                return Err(CorpusError::InvalidRecord {
                    line: i + 1,
                    message: "document id is empty".into(),
                });
            }
            if doc_index.insert(d.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    id: d.id.clone(),
                });
            }
        }
        let mut reference_index = HashMap::new();
        let mut summary_ids = BTreeSet::new();
        for (i, s) in summaries.iter().enumerate() {
            if !summary_ids.insert(s.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    id: s.id.clone(),
                });
            }
            if !doc_index.contains_key(&s.doc_id) {
                return Err(CorpusError::DanglingReference {
                    line: i + 1,
                    summary_id: s.id.clone(),
                    doc_id: s.doc_id.clone(),
                });
            }
            if s.kind == SummaryKind::Reference
                && reference_index.insert(s.doc_id.clone(), i).is_some()
            {
                return Err(CorpusError::InvalidRecord {
                    line: i + 1,
                    message: format!("document {:?} has two reference summaries", s.doc_id),
                });
            }
        }
        if let Some(d) = documents
            .iter()
            .find(|d| !reference_index.contains_key(&d.id))
        {
            return Err(CorpusError::InvalidRecord {
                line: doc_index[&d.id] + 1,
                message: format!("document {:?} has no reference summary", d.id),
            });
        }
        Ok(Self {
            label: label.into(),
            documents,
            summaries,
            doc_index,
            reference_index,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn summaries(&self) -> &[SummaryRecord] {
        &self.summaries
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.doc_index.get(id).map(|&i| &self.documents[i])
    }

    /// The reference summary of a document.
    pub fn reference(&self, doc_id: &str) -> Option<&SummaryRecord> {
        self.reference_index
            .get(doc_id)
            .map(|&i| &self.summaries[i])
    }

    pub fn references(&self) -> impl Iterator<Item = &SummaryRecord> {
        self.documents
            .iter()
            .map(move |d| &self.summaries[self.reference_index[&d.id]])
    }

    pub fn is_annotated(&self) -> bool {
        self.documents.iter().all(|d| d.annotations.is_some())
            && self.summaries.iter().all(|s| s.annotations.is_some())
    }

    /// Fills in missing annotations with `annotate`; existing annotations are
    /// kept as they are.
    pub fn annotate_missing<F>(self, mut annotate: F) -> Self
    where
        F: FnMut(&str) -> Annotations,
    {
        let Corpus {
            label,
            mut documents,
            mut summaries,
            doc_index,
            reference_index,
        } = self;
        for d in &mut documents {
            if d.annotations.is_none() {
                d.annotations = Some(annotate(&d.text));
            }
        }
        for s in &mut summaries {
            if s.annotations.is_none() {
                s.annotations = Some(annotate(&s.text));
            }
        }
        Corpus {
            label,
            documents,
            summaries,
            doc_index,
            reference_index,
        }
    }

    /// Writes the canonical serialization.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", header_line(CORPUS_SCHEMA))?;
        for d in &self.documents {
            let reference = self.reference(&d.id).expect("checked at construction");
            let annotations = match (&d.annotations, &reference.annotations) {
                (None, None) => None,
                (src, summ) => Some(RecordAnnotations {
                    source: src.clone(),
                    summary: summ.clone(),
                }),
            };
            let line = DocumentLine {
                id: d.id.clone(),
                source_text: d.text.clone(),
                reference_summary: reference.text.clone(),
                domain: d.domain,
                annotations,
            };
            writeln!(out, "{}", serde_json::to_string(&line)?)?;
        }
        for s in self
            .summaries
            .iter()
            .filter(|s| s.kind != SummaryKind::Reference)
        {
            let line = SummaryLine {
                id: s.id.clone(),
                doc_id: s.doc_id.clone(),
                kind: s.kind,
                text: s.text.clone(),
                annotations: s.annotations.clone(),
            };
            writeln!(out, "{}", serde_json::to_string(&line)?)?;
        }
        Ok(())
    }

    pub fn to_canonical_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits utf-8")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_canonical_string().as_bytes()))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordAnnotations {
    #[serde(default)]
    source: Option<Annotations>,
    #[serde(default)]
    summary: Option<Annotations>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentLine {
    id: String,
    source_text: String,
    reference_summary: String,
    domain: Domain,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    annotations: Option<RecordAnnotations>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SummaryLine {
    id: String,
    doc_id: String,
    kind: SummaryKind,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    annotations: Option<Annotations>,
}

pub(crate) fn header_line(schema: &str) -> String {
    serde_json::json!({ "schema": schema }).to_string()
}

/// Checks the header line of a newline-delimited file.
pub(crate) fn check_header(
    line: &str,
    expected: &'static str,
) -> Result<serde_json::Value, CorpusError> {
    let value: serde_json::Value = serde_json::from_str(line).map_err(|_| CorpusError::Header {
        expected,
        found: truncate(line),
    })?;
    match value.get("schema").and_then(|s| s.as_str()) {
        Some(s) if s == expected => Ok(value),
        _ => Err(CorpusError::Header {
            expected,
            found: truncate(line),
        }),
    }
}

fn truncate(line: &str) -> String {
    let mut s: String = line.chars().take(60).collect();
    if s.len() < line.len() {
        s.push('…');
    }
    s
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads a corpus file. With `expect_annotations`, every document and summary
/// must carry annotations.
pub fn load_corpus(path: &Path, expect_annotations: bool) -> Result<Corpus, CorpusError> {
    let content = read(path)?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    parse_corpus(&content, &label, expect_annotations)
}

/// The bundled 20-document toy corpus (unannotated), in file form.
pub const TOY_CORPUS_JSONL: &str = include_str!("../data/toy_corpus.jsonl");

pub fn toy_corpus() -> Corpus {
    parse_corpus(TOY_CORPUS_JSONL, "toy_corpus", false).expect("bundled toy corpus parses")
}

pub fn parse_corpus(
    content: &str,
    label: &str,
    expect_annotations: bool,
) -> Result<Corpus, CorpusError> {
    let mut lines = content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(CorpusError::NoRecords);
    };
    check_header(header, CORPUS_SCHEMA)?;

    let mut documents = Vec::new();
    let mut references = Vec::new();
    let mut extra = Vec::new();
    let mut doc_lines = HashMap::new();
    let mut line_of_summary = HashMap::new();
    for (line, raw) in lines {
        let value: serde_json::Value =
            serde_json::from_str(raw).map_err(|e| CorpusError::Malformed {
                line,
                message: e.to_string(),
            })?;
        let malformed = |e: serde_json::Error| CorpusError::Malformed {
            line,
            message: e.to_string(),
        };
        if value.get("doc_id").is_some() {
            let rec: SummaryLine = serde_json::from_value(value).map_err(malformed)?;
            if rec.kind == SummaryKind::Reference {
                return Err(CorpusError::InvalidRecord {
                    line,
                    message: "reference summaries belong on their document record".into(),
                });
            }
            if let Some(a) = &rec.annotations {
                a.validate(&rec.text)
                    .map_err(|message| CorpusError::InvalidAnnotation {
                        id: rec.id.clone(),
                        message,
                    })?;
            }
            line_of_summary.insert(rec.id.clone(), line);
            extra.push(SummaryRecord {
                id: rec.id,
                doc_id: rec.doc_id,
                text: rec.text,
                kind: rec.kind,
                annotations: rec.annotations,
            });
        } else {
            let rec: DocumentLine = serde_json::from_value(value).map_err(malformed)?;
            if rec.id.is_empty() {
                return Err(CorpusError::InvalidRecord {
                    line,
                    message: "id is empty".into(),
                });
            }
            if doc_lines.insert(rec.id.clone(), line).is_some() {
                return Err(CorpusError::DuplicateId { line, id: rec.id });
            }
            let (src_ann, summ_ann) = match rec.annotations {
                Some(a) => (a.source, a.summary),
                None => (None, None),
            };
            for (ann, text) in [
                (&src_ann, &rec.source_text),
                (&summ_ann, &rec.reference_summary),
            ] {
                if let Some(a) = ann {
                    a.validate(text)
                        .map_err(|message| CorpusError::InvalidAnnotation {
                            id: rec.id.clone(),
                            message,
                        })?;
                }
            }
            references.push(SummaryRecord {
                id: rec.id.clone(),
                doc_id: rec.id.clone(),
                text: rec.reference_summary,
                kind: SummaryKind::Reference,
                annotations: summ_ann,
            });
            documents.push(Document {
                id: rec.id,
                text: rec.source_text,
                domain: rec.domain,
                annotations: src_ann,
            });
        }
    }
    if documents.is_empty() {
        return Err(CorpusError::NoRecords);
    }
    for s in &extra {
        let line = line_of_summary[&s.id];
        if !doc_lines.contains_key(&s.doc_id) {
            return Err(CorpusError::DanglingReference {
                line,
                summary_id: s.id.clone(),
                doc_id: s.doc_id.clone(),
            });
        }
        if doc_lines.contains_key(&s.id) || references.iter().any(|r| r.id == s.id) {
            return Err(CorpusError::DuplicateId {
                line,
                id: s.id.clone(),
            });
        }
    }
    if expect_annotations {
        if let Some(d) = documents.iter().find(|d| d.annotations.is_none()) {
            return Err(CorpusError::MissingAnnotations { id: d.id.clone() });
        }
        if let Some(s) = references
            .iter()
            .chain(extra.iter())
            .find(|s| s.annotations.is_none())
        {
            return Err(CorpusError::MissingAnnotations { id: s.id.clone() });
        }
    }
    let mut summaries = references;
    summaries.extend(extra);
    Corpus::new(label, documents, summaries)
}

/// Loads a human-annotation file.
pub fn load_human_annotations(path: &Path) -> Result<Vec<HumanAnnotationRecord>, CorpusError> {
    parse_human_annotations(&read(path)?)
}

pub fn parse_human_annotations(content: &str) -> Result<Vec<HumanAnnotationRecord>, CorpusError> {
    let mut lines = content
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(CorpusError::NoRecords);
    };
    check_header(header, HUMAN_SCHEMA)?;
    let mut seen = BTreeSet::new();
    let mut records = Vec::new();
    for (line, raw) in lines {
        let rec: HumanAnnotationRecord =
            serde_json::from_str(raw).map_err(|e| CorpusError::Malformed {
                line,
                message: e.to_string(),
            })?;
        rec.validate()
            .map_err(|message| CorpusError::InvalidRecord { line, message })?;
        if !seen.insert(rec.summary_id.clone()) {
            return Err(CorpusError::DuplicateId {
                line,
                id: rec.summary_id,
            });
        }
        records.push(rec);
    }
    if records.is_empty() {
        return Err(CorpusError::NoRecords);
    }
    Ok(records)
}

pub fn write_human_annotations<W: Write>(
    records: &[HumanAnnotationRecord],
    mut out: W,
) -> std::io::Result<()> {
    writeln!(out, "{}", header_line(HUMAN_SCHEMA))?;
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatKind {
    Words,
    Entities,
    PronounWords,
    Verbs,
    Adjectives,
}

impl StatKind {
    pub const ALL: [StatKind; 5] = [
        StatKind::Words,
        StatKind::Entities,
        StatKind::PronounWords,
        StatKind::Verbs,
        StatKind::Adjectives,
    ];

    pub fn title(&self) -> &'static str {
        match self {
            StatKind::Words => "Avg #Words",
            StatKind::Entities => "Avg #Entities",
            StatKind::PronounWords => "Avg #Pronoun words",
            StatKind::Verbs => "Avg #Verbs",
            StatKind::Adjectives => "Avg #Adjectives",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Aggregate {
    fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        Self {
            mean: values.iter().sum::<f64>() / n,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub stat: StatKind,
    pub summary: Aggregate,
    pub source: Aggregate,
}

/// Per-corpus descriptive statistics, summaries vs. sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsTable {
    pub label: String,
    pub documents: usize,
    pub rows: Vec<StatRow>,
}

impl StatsTable {
    pub fn row(&self, stat: StatKind) -> &StatRow {
        self.rows
            .iter()
            .find(|r| r.stat == stat)
            .expect("every stat kind is present")
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!(
            "| Stat ({}, {} documents) | summ/source |\n|---|---|\n",
            self.label, self.documents
        );
        for r in &self.rows {
            out.push_str(&format!(
                "| {} (summ/source) | {:.2}/{:.2} |\n",
                r.stat.title(),
                r.summary.mean,
                r.source.mean
            ));
        }
        out
    }
}

fn record_counts(text: &str, ann: &Annotations, pronouns: &PronounLexicon) -> [f64; 5] {
    let words = text::stat_words(text);
    let pronoun_words = words
        .iter()
        .filter(|w| pronouns.contains(&w.to_lowercase()))
        .count();
    [
        words.len() as f64,
        ann.entities.len() as f64,
        pronoun_words as f64,
        ann.verbs.len() as f64,
        ann.adjectives.len() as f64,
    ]
}

/// Average word, entity, pronoun-word, verb and adjective counts for the
/// reference summaries and the source documents.
pub fn corpus_stats(corpus: &Corpus) -> Result<StatsTable, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let pronouns = PronounLexicon::bundled();
    let mut summ: Vec<[f64; 5]> = Vec::with_capacity(corpus.len());
    let mut src: Vec<[f64; 5]> = Vec::with_capacity(corpus.len());
    for d in corpus.documents() {
        let reference = corpus.reference(&d.id).expect("checked at construction");
        let d_ann = d
            .annotations
            .as_ref()
            .ok_or_else(|| CorpusError::MissingAnnotations { id: d.id.clone() })?;
        let s_ann =
            reference
                .annotations
                .as_ref()
                .ok_or_else(|| CorpusError::MissingAnnotations {
                    id: reference.id.clone(),
                })?;
        src.push(record_counts(&d.text, d_ann, &pronouns));
        summ.push(record_counts(&reference.text, s_ann, &pronouns));
    }
    let column = |rows: &[[f64; 5]], k: usize| rows.iter().map(|r| r[k]).collect::<Vec<_>>();
    let rows = StatKind::ALL
        .iter()
        .enumerate()
        .map(|(k, &stat)| StatRow {
            stat,
            summary: Aggregate::of(&column(&summ, k)),
            source: Aggregate::of(&column(&src, k)),
        })
        .collect();
    Ok(StatsTable {
        label: corpus.label().to_string(),
        documents: corpus.len(),
        rows,
    })
}

/// Uniform sample of `n` documents without replacement. The selection depends
/// only on the set of document ids and the seed, not on record order; the
/// returned corpus keeps the input order of the selected documents.
pub fn sample_eval_set(corpus: &Corpus, n: usize, seed: u64) -> Result<Corpus, CorpusError> {
    if n > corpus.len() {
        return Err(CorpusError::SampleTooLarge {
            requested: n,
            available: corpus.len(),
        });
    }
    let mut ids: Vec<&str> = corpus.documents().iter().map(|d| d.id.as_str()).collect();
    ids.sort_unstable();
    let mut rng = rng::seeded(seed);
    let chosen: BTreeSet<&str> = index::sample(&mut rng, ids.len(), n)
        .into_iter()
        .map(|i| ids[i])
        .collect();
    let documents = corpus
        .documents()
        .iter()
        .filter(|d| chosen.contains(d.id.as_str()))
        .cloned()
        .collect();
    let summaries = corpus
        .summaries()
        .iter()
        .filter(|s| chosen.contains(s.doc_id.as_str()))
        .cloned()
        .collect();
    let label = if n == corpus.len() {
        corpus.label().to_string()
    } else {
        format!("{} (sample n={n}, seed={seed})", corpus.label())
    };
    Corpus::new(label, documents, summaries)
}
