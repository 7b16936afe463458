//! The metric abstraction M(D, S), native lexical-overlap metrics, external
//! adapters and bulk scoring.

pub mod protocol;
pub mod rouge;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, SummaryKind};
use crate::perturb::DiagnosticDataset;

pub use protocol::{AdapterClient, AdapterError, Message};
pub use rouge::{rouge_l, rouge_n, tokenize, RougeScore};

pub const SCORES_SCHEMA: &str = "factgauge.scores/v1";

/// A score, or the reason there is none.
pub type Outcome = Result<f64, String>;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error("metric {name:?}: {message}")]
    InvalidDescriptor { name: String, message: String },
    #[error("duplicate item id {0:?}")]
    DuplicateId(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line 1: expected header with schema {expected:?}")]
    Header { expected: &'static str },
    #[error("line {line}: malformed score row: {message}")]
    Malformed { line: usize, message: String },
    #[error("{0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Native,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NativeMetric {
    #[serde(rename = "rouge-1")]
    Rouge1,
    #[serde(rename = "rouge-2")]
    Rouge2,
    #[serde(rename = "rouge-l")]
    RougeL,
}

impl NativeMetric {
    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "rouge-1" | "rouge1" | "r-1" => Some(Self::Rouge1),
            "rouge-2" | "rouge2" | "r-2" => Some(Self::Rouge2),
            "rouge-l" | "rougel" | "r-l" => Some(Self::RougeL),
            _ => None,
        }
    }

    pub fn score(self, statistic: Statistic, reference: &str, candidate: &str) -> f64 {
        let s = match self {
            Self::Rouge1 => rouge_n(1, reference, candidate).expect("n = 1"),
            Self::Rouge2 => rouge_n(2, reference, candidate).expect("n = 2"),
            Self::RougeL => rouge_l(reference, candidate),
        };
        match statistic {
            Statistic::F1 => s.f1,
            Statistic::Precision => s.precision,
            Statistic::Recall => s.recall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    #[default]
    F1,
    Precision,
    Recall,
}

/// What the summary is compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Against {
    #[default]
    Source,
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    #[default]
    HigherIsMoreFactual,
}

/// One entry of the metric manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricDescriptor {
    pub name: String,
    pub kind: MetricKind,
    /// Native metric to run; defaults to the one named by `name`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native: Option<NativeMetric>,
    #[serde(default, skip_serializing_if = "Statistic::is_default")]
    pub statistic: Statistic,
    /// Adapter program and arguments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Vec<String>>,
    /// Factor applied when rendering; 100 for native metrics by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default)]
    pub against: Against,
    #[serde(default)]
    pub direction: Direction,
}

impl Statistic {
    fn is_default(&self) -> bool {
        *self == Statistic::F1
    }
}

impl MetricDescriptor {
    pub fn native(name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind: MetricKind::Native,
            native: None,
            statistic: Statistic::F1,
            command: None,
            scale: None,
            against: Against::Source,
            direction: Direction::HigherIsMoreFactual,
        }
    }

    pub fn external(name: &str, command: Vec<String>) -> Self {
        Self {
            kind: MetricKind::External,
            command: Some(command),
            ..Self::native(name)
        }
    }

    pub fn resolved_native(&self) -> Option<NativeMetric> {
        self.native.or_else(|| NativeMetric::from_name(&self.name))
    }

    pub fn display_scale(&self) -> f64 {
        self.scale.unwrap_or(match self.kind {
            MetricKind::Native => 100.0,
            MetricKind::External => 1.0,
        })
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        let bad = |message: &str| MetricError::InvalidDescriptor {
            name: self.name.clone(),
            message: message.to_string(),
        };
        if self.name.trim().is_empty() {
            return Err(bad("name is empty"));
        }
        if self.scale.is_some_and(|s| !(s.is_finite() && s > 0.0)) {
            return Err(bad("scale must be a positive finite number"));
        }
        match self.kind {
            MetricKind::Native if self.resolved_native().is_none() => Err(bad(
                "unknown native metric; set `native` to rouge-1, rouge-2 or rouge-l",
            )),
            MetricKind::Native if self.command.is_some() => {
                Err(bad("native metrics take no command"))
            }
            MetricKind::External if self.command.as_ref().is_none_or(|c| c.is_empty()) => {
                Err(bad("external metrics need a non-empty command"))
            }
            _ => Ok(()),
        }
    }

    /// Builds the scorer for this descriptor.
    pub fn scorer(&self, timeout: Duration) -> Result<Box<dyn Scorer>, MetricError> {
        self.validate()?;
        Ok(match self.kind {
            MetricKind::Native => Box::new(NativeScorer {
                name: self.name.clone(),
                metric: self.resolved_native().expect("validated"),
                statistic: self.statistic,
                against: self.against,
            }),
            MetricKind::External => Box::new(ExternalScorer {
                name: self.name.clone(),
                command: self.command.clone().expect("validated"),
                against: self.against,
                timeout,
            }),
        })
    }
}

/// Checks each descriptor and that names are unique.
pub fn validate_manifest(metrics: &[MetricDescriptor]) -> Result<(), MetricError> {
    let mut seen = BTreeSet::new();
    for m in metrics {
        m.validate()?;
        if !seen.insert(m.name.as_str()) {
            return Err(MetricError::InvalidDescriptor {
                name: m.name.clone(),
                message: "duplicate metric name".into(),
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItemKind {
    /// Reference summary; gives the upper bound and level 0.
    Reference,
    /// Reference summary of another document; gives the lower bound.
    Random,
    Diagnostic,
    Generated,
}

/// One (source, summary) pair to score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreItem {
    pub id: String,
    pub kind: ItemKind,
    pub doc_id: String,
    pub source: Arc<str>,
    pub reference: Arc<str>,
    pub summary: String,
}

impl ScoreItem {
    pub fn compared_text(&self, against: Against) -> &str {
        match against {
            Against::Source => &self.source,
            Against::Reference => &self.reference,
        }
    }
}

pub fn reference_item_id(doc_id: &str) -> String {
    format!("{doc_id}/reference")
}

pub fn random_item_id(doc_id: &str) -> String {
    format!("{doc_id}/random")
}

/// Everything the scoring stage scores: per document its reference and its
/// random pairing (`lower_pairs` maps a document to the document whose
/// reference serves as its random summary), every diagnostic instance, and
/// every generated summary in the corpus.
pub fn build_items(
    corpus: &Corpus,
    dataset: Option<&DiagnosticDataset>,
    lower_pairs: &BTreeMap<String, String>,
) -> Result<Vec<ScoreItem>, MetricError> {
    let mut sources: HashMap<&str, (Arc<str>, Arc<str>)> = HashMap::new();
    for doc in corpus.documents() {
        let reference = corpus
            .reference(&doc.id)
            .expect("corpus guarantees a reference");
        sources.insert(
            doc.id.as_str(),
            (
                Arc::from(doc.text.as_str()),
                Arc::from(reference.text.as_str()),
            ),
        );
    }
    let ctx = |doc_id: &str| {
        sources
            .get(doc_id)
            .cloned()
            .ok_or_else(|| MetricError::InvalidParameter(format!("unknown document {doc_id:?}")))
    };
    let mut items = Vec::new();
    for doc in corpus.documents() {
        let (source, reference) = ctx(&doc.id)?;
        items.push(ScoreItem {
            id: reference_item_id(&doc.id),
            kind: ItemKind::Reference,
            doc_id: doc.id.clone(),
            source: source.clone(),
            reference: reference.clone(),
            summary: reference.to_string(),
        });
        if let Some(other) = lower_pairs.get(&doc.id) {
            let (_, other_ref) = ctx(other)?;
            items.push(ScoreItem {
                id: random_item_id(&doc.id),
                kind: ItemKind::Random,
                doc_id: doc.id.clone(),
                source,
                reference,
                summary: other_ref.to_string(),
            });
        }
    }
    if let Some(ds) = dataset {
        for inst in &ds.instances {
            let (source, reference) = ctx(&inst.doc_id)?;
            items.push(ScoreItem {
                id: inst.id.clone(),
                kind: ItemKind::Diagnostic,
                doc_id: inst.doc_id.clone(),
                source,
                reference,
                summary: inst.text.clone(),
            });
        }
    }
    for s in corpus
        .summaries()
        .iter()
        .filter(|s| s.kind == SummaryKind::Generated)
    {
        let (source, reference) = ctx(&s.doc_id)?;
        items.push(ScoreItem {
            id: s.id.clone(),
            kind: ItemKind::Generated,
            doc_id: s.doc_id.clone(),
            source,
            reference,
            summary: s.text.clone(),
        });
    }
    let mut seen = BTreeSet::new();
    for item in &items {
        if !seen.insert(item.id.as_str()) {
            return Err(MetricError::DuplicateId(item.id.clone()));
        }
    }
    Ok(items)
}

/// Anything that can score a batch of items, returning one outcome per item
/// in input order.
pub trait Scorer: Sync {
    fn name(&self) -> &str;
    fn score_items(&self, items: &[ScoreItem], workers: usize)
        -> Result<Vec<Outcome>, MetricError>;
}

pub struct NativeScorer {
    name: String,
    metric: NativeMetric,
    statistic: Statistic,
    against: Against,
}

impl Scorer for NativeScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_items(
        &self,
        items: &[ScoreItem],
        _workers: usize,
    ) -> Result<Vec<Outcome>, MetricError> {
        Ok(items
            .par_iter()
            .map(|it| {
                Ok(self
                    .metric
                    .score(self.statistic, it.compared_text(self.against), &it.summary))
            })
            .collect())
    }
}

/// Scores through adapter processes, one per contiguous chunk of items.
pub struct ExternalScorer {
    name: String,
    command: Vec<String>,
    against: Against,
    timeout: Duration,
}

impl ExternalScorer {
    pub fn new(name: &str, command: Vec<String>, timeout: Duration) -> Self {
        Self {
            name: name.to_string(),
            command,
            against: Against::Source,
            timeout,
        }
    }
}

impl Scorer for ExternalScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score_items(
        &self,
        items: &[ScoreItem],
        workers: usize,
    ) -> Result<Vec<Outcome>, MetricError> {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let chunk = items.len().div_ceil(workers.max(1));
        let parts: Vec<Result<Vec<Outcome>, AdapterError>> = items
            .par_chunks(chunk)
            .map(|part| {
                let batch: Vec<(&str, &str, &str)> = part
                    .iter()
                    .map(|it| {
                        (
                            it.id.as_str(),
                            it.compared_text(self.against),
                            it.summary.as_str(),
                        )
                    })
                    .collect();
                score_external(&self.command, &batch, self.timeout)
            })
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for p in parts {
            out.extend(p?);
        }
        Ok(out)
    }
}

/// Scores `(id, source, summary)` triples with one adapter session, in input
/// order. An empty batch never launches the adapter.
pub fn score_external(
    command: &[String],
    batch: &[(&str, &str, &str)],
    timeout: Duration,
) -> Result<Vec<Outcome>, AdapterError> {
    if batch.is_empty() {
        return Ok(Vec::new());
    }
    let mut client = AdapterClient::spawn(command, timeout)?;
    let mut out = Vec::with_capacity(batch.len());
    for (id, source, summary) in batch {
        out.push(client.score(id, source, summary)?);
    }
    client.close();
    Ok(out)
}

/// Complete metric × item score table.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    metrics: Vec<String>,
    ids: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<Vec<Outcome>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreRow {
    metric: String,
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl ScoreTable {
    pub fn new(ids: Vec<String>) -> Result<Self, MetricError> {
        let mut index = HashMap::new();
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(MetricError::DuplicateId(id.clone()));
            }
        }
        Ok(Self {
            metrics: Vec::new(),
            ids,
            index,
            values: Vec::new(),
        })
    }

    pub fn add_metric(&mut self, name: &str, outcomes: Vec<Outcome>) -> Result<(), MetricError> {
        if outcomes.len() != self.ids.len() {
            return Err(MetricError::InvalidParameter(format!(
                "metric {name:?} has {} scores for {} items",
                outcomes.len(),
                self.ids.len()
            )));
        }
        if self.metrics.iter().any(|m| m == name) {
            return Err(MetricError::InvalidDescriptor {
                name: name.into(),
                message: "duplicate metric name".into(),
            });
        }
        let outcomes = outcomes
            .into_iter()
            .map(|o| match o {
                Ok(v) if !v.is_finite() => Err("non-finite value".to_string()),
                o => o,
            })
            .collect();
        self.metrics.push(name.to_string());
        self.values.push(outcomes);
        Ok(())
    }

    pub fn metrics(&self) -> &[String] {
        &self.metrics
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, metric: &str, id: &str) -> Option<&Outcome> {
        let m = self.metrics.iter().position(|x| x == metric)?;
        let i = *self.index.get(id)?;
        Some(&self.values[m][i])
    }

    pub fn value(&self, metric: &str, id: &str) -> Option<f64> {
        self.get(metric, id).and_then(|o| o.as_ref().ok().copied())
    }

    /// All `(metric, id, message)` failures.
    pub fn errors(&self) -> Vec<(&str, &str, &str)> {
        let mut out = Vec::new();
        for (m, row) in self.metrics.iter().zip(&self.values) {
            for (id, o) in self.ids.iter().zip(row) {
                if let Err(e) = o {
                    out.push((m.as_str(), id.as_str(), e.as_str()));
                }
            }
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", serde_json::json!({ "schema": SCORES_SCHEMA }))?;
        for (m, row) in self.metrics.iter().zip(&self.values) {
            for (id, o) in self.ids.iter().zip(row) {
                let r = ScoreRow {
                    metric: m.clone(),
                    id: id.clone(),
                    value: o.as_ref().ok().copied(),
                    error: o.as_ref().err().cloned(),
                };
                writeln!(out, "{}", serde_json::to_string(&r)?)?;
            }
        }
        Ok(())
    }

    pub fn to_canonical_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn parse(content: &str) -> Result<Self, MetricError> {
        let mut lines = content
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let header_ok = lines
            .next()
            .and_then(|(_, l)| serde_json::from_str::<serde_json::Value>(l).ok())
            .is_some_and(|v| v.get("schema").and_then(|s| s.as_str()) == Some(SCORES_SCHEMA));
        if !header_ok {
            return Err(MetricError::Header {
                expected: SCORES_SCHEMA,
            });
        }
        let mut metrics: Vec<String> = Vec::new();
        let mut per_metric: HashMap<String, Vec<(String, Outcome)>> = HashMap::new();
        for (n, line) in lines {
            let row: ScoreRow = serde_json::from_str(line).map_err(|e| MetricError::Malformed {
                line: n + 1,
                message: e.to_string(),
            })?;
            let outcome = match (row.value, row.error) {
                (Some(v), None) => Ok(v),
                (None, Some(e)) => Err(e),
                _ => {
                    return Err(MetricError::Malformed {
                        line: n + 1,
                        message: "exactly one of value and error is required".into(),
                    })
                }
            };
            if !per_metric.contains_key(&row.metric) {
                metrics.push(row.metric.clone());
            }
            per_metric
                .entry(row.metric)
                .or_default()
                .push((row.id, outcome));
        }
        let ids: Vec<String> = metrics
            .first()
            .map(|m| per_metric[m].iter().map(|(id, _)| id.clone()).collect())
            .unwrap_or_default();
        let mut table = Self::new(ids)?;
        for m in metrics {
            let rows = per_metric.remove(&m).expect("collected above");
            let same_ids = rows.len() == table.ids.len()
                && rows
                    .iter()
                    .zip(&table.ids)
                    .all(|((id, _), want)| id == want);
            if !same_ids {
                return Err(MetricError::Malformed {
                    line: 0,
                    message: format!(
                        "metric {m:?} does not cover the same items as the first metric"
                    ),
                });
            }
            table.add_metric(&m, rows.into_iter().map(|(_, o)| o).collect())?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, MetricError> {
        let content = std::fs::read_to_string(path).map_err(|source| MetricError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&content)
    }
}

/// Scores every item with every scorer. Values do not depend on `workers`.
pub fn score_dataset(
    scorers: &[&dyn Scorer],
    items: &[ScoreItem],
    workers: usize,
) -> Result<ScoreTable, MetricError> {
    if workers < 1 {
        return Err(MetricError::InvalidParameter(
            "workers must be at least 1".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| MetricError::InvalidParameter(e.to_string()))?;
    let mut table = ScoreTable::new(items.iter().map(|i| i.id.clone()).collect())?;
    for scorer in scorers {
        let outcomes = pool.install(|| scorer.score_items(items, workers))?;
        table.add_metric(scorer.name(), outcomes)?;
    }
    Ok(table)
}

/// Builds scorers from descriptors and scores all items.
pub fn score_with_descriptors(
    metrics: &[MetricDescriptor],
    items: &[ScoreItem],
    workers: usize,
    timeout: Duration,
) -> Result<ScoreTable, MetricError> {
    validate_manifest(metrics)?;
    let scorers = metrics
        .iter()
        .map(|m| m.scorer(timeout))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&dyn Scorer> = scorers.iter().map(|b| b.as_ref()).collect();
    score_dataset(&refs, items, workers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item(id: &str, source: &str, summary: &str) -> ScoreItem {
        ScoreItem {
            id: id.into(),
            kind: ItemKind::Diagnostic,
            doc_id: "d".into(),
            source: Arc::from(source),
            reference: Arc::from(source),
            summary: summary.into(),
        }
    }

    #[test]
    fn descriptor_validation() {
        assert!(MetricDescriptor::native("rouge-1").validate().is_ok());
        assert!(MetricDescriptor::native("bleu").validate().is_err());
        assert!(MetricDescriptor::external("x", vec![]).validate().is_err());
        let dup = [
            MetricDescriptor::native("rouge-1"),
            MetricDescriptor::native("rouge-1"),
        ];
        assert!(validate_manifest(&dup).is_err());
        assert_eq!(MetricDescriptor::native("rouge-l").display_scale(), 100.0);
        let toml_like = r#"{"name":"r1","kind":"native","native":"rouge-1"}"#;
        let d: MetricDescriptor = serde_json::from_str(toml_like).unwrap();
        assert_eq!(d.resolved_native(), Some(NativeMetric::Rouge1));
    }

    #[test]
    fn native_scores_in_order_and_worker_independent() {
        let items: Vec<ScoreItem> = (0..10)
            .map(|i| {
                item(
                    &format!("i{i}"),
                    "the cat sat on the mat",
                    &"the cat ".repeat(i + 1),
                )
            })
            .collect();
        let d = [
            MetricDescriptor::native("rouge-1"),
            MetricDescriptor::native("rouge-l"),
        ];
        let t1 = score_with_descriptors(&d, &items, 1, Duration::from_secs(1)).unwrap();
        let t8 = score_with_descriptors(&d, &items, 8, Duration::from_secs(1)).unwrap();
        assert_eq!(t1, t8);
        assert_eq!(t1.ids().len(), 10);
        assert_eq!(t1.metrics(), ["rouge-1", "rouge-l"]);
        let direct = rouge_n(1, "the cat sat on the mat", "the cat ").unwrap().f1;
        assert_eq!(t1.value("rouge-1", "i0"), Some(direct));
    }

    #[test]
    fn table_file_round_trip() {
        let mut t = ScoreTable::new(vec!["a".into(), "b".into()]).unwrap();
        t.add_metric("m", vec![Ok(0.25), Err("boom".into())])
            .unwrap();
        t.add_metric("n", vec![Ok(f64::NAN), Ok(1.0)]).unwrap();
        assert!(t.get("n", "a").unwrap().is_err());
        let text = t.to_canonical_string();
        assert_eq!(ScoreTable::parse(&text).unwrap(), t);
        assert_eq!(t.errors().len(), 2);
        assert!(ScoreTable::new(vec!["a".into(), "a".into()]).is_err());
        assert!(ScoreTable::parse("{}").is_err());
    }

    #[test]
    fn empty_external_batch_never_launches() {
        let out = score_external(
            &["/nonexistent".to_string()],
            &[],
            Duration::from_millis(10),
        );
        assert!(out.unwrap().is_empty());
    }
}
