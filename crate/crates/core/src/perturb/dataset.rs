use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    apply_error, build_entity_dictionary, AppliedError, DictionaryScope, ErrorContext,
    PerturbError, Subset, WorkingSummary,
};
use crate::corpus::{Corpus, Document, Domain};
use crate::rng;
use crate::taggers::LexiconSet;

pub const DIAGNOSTIC_SCHEMA: &str = "factgauge.diagnostic/v1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticHeader {
    pub schema: String,
    pub seed: u64,
    pub max_level: u32,
    pub runs: u32,
    pub corpus_checksum: String,
}

/// One transformed reference summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticInstance {
    pub id: String,
    pub doc_id: String,
    pub domain: Domain,
    pub run: u32,
    /// Nominal level: the number of edits attempted.
    pub level: u32,
    pub subset: Subset,
    pub text: String,
    pub applied: Vec<AppliedError>,
}

impl DiagnosticInstance {
    pub fn instance_id(doc_id: &str, run: u32, level: u32, subset: Subset) -> String {
        format!("{doc_id}/r{run}/l{level}/{subset}")
    }

    pub fn error_count(&self) -> usize {
        self.applied.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagnosticDataset {
    pub header: DiagnosticHeader,
    pub instances: Vec<DiagnosticInstance>,
}

impl DiagnosticDataset {
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", serde_json::to_string(&self.header)?)?;
        for inst in &self.instances {
            writeln!(out, "{}", serde_json::to_string(inst)?)?;
        }
        Ok(())
    }

    pub fn to_canonical_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf)
            .expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }
}

pub fn load_diagnostic(path: &Path) -> Result<DiagnosticDataset, PerturbError> {
    let content = std::fs::read_to_string(path).map_err(|source| PerturbError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_diagnostic(&content)
}

pub fn parse_diagnostic(content: &str) -> Result<DiagnosticDataset, PerturbError> {
    let mut lines = content
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or(PerturbError::EmptyDataset)?;
    let header: DiagnosticHeader =
        serde_json::from_str(first).map_err(|_| PerturbError::Header {
            expected: DIAGNOSTIC_SCHEMA,
        })?;
    if header.schema != DIAGNOSTIC_SCHEMA {
        return Err(PerturbError::Header {
            expected: DIAGNOSTIC_SCHEMA,
        });
    }
    let instances = lines
        .map(|(n, line)| {
            serde_json::from_str(line).map_err(|e| PerturbError::Malformed {
                line: n + 1,
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(DiagnosticDataset { header, instances })
}

/// Builds the diagnostic dataset: for every document, run `r < runs`, level
/// `1..=max_level` and subset, the reference summary receives `level` edits
/// of error types drawn uniformly (with replacement) from the subset.
///
/// Each instance draws from its own stream keyed by (doc, run, level,
/// subset), so the output does not depend on `workers`.
pub fn generate_diagnostic(
    corpus: &Corpus,
    max_level: u32,
    runs: u32,
    seed: u64,
    lexicons: &LexiconSet,
    workers: usize,
) -> Result<DiagnosticDataset, PerturbError> {
    if max_level < 1 || runs < 1 || workers < 1 {
        return Err(PerturbError::InvalidParameter(format!(
            "max level, runs and workers must be at least 1 (got {max_level}, {runs}, {workers})"
        )));
    }
    for doc in corpus.documents() {
        let reference = corpus
            .reference(&doc.id)
            .expect("corpus guarantees a reference");
        if doc.annotations.is_none() {
            return Err(PerturbError::Unannotated { id: doc.id.clone() });
        }
        if reference.annotations.is_none() {
            return Err(PerturbError::Unannotated {
                id: reference.id.clone(),
            });
        }
    }
    let all_docs: Vec<&Document> = corpus.documents().iter().collect();
    let corpus_dict = build_entity_dictionary(DictionaryScope::CorpusWide, &all_docs)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PerturbError::InvalidParameter(e.to_string()))?;
    let per_doc: Vec<Vec<DiagnosticInstance>> = pool.install(|| {
        corpus
            .documents()
            .par_iter()
            .map(|doc| {
                let doc_dict = build_entity_dictionary(DictionaryScope::SingleDocument, &[doc])
                    .expect("annotations checked above");
                let ctx = ErrorContext {
                    source: doc,
                    doc_dict: &doc_dict,
                    corpus_dict: &corpus_dict,
                    lexicons,
                };
                let reference = corpus.reference(&doc.id).expect("checked above");
                instances_for_document(
                    doc,
                    &reference.text,
                    reference.annotations.as_ref().expect("checked above"),
                    &ctx,
                    max_level,
                    runs,
                    seed,
                )
            })
            .collect()
    });

    Ok(DiagnosticDataset {
        header: DiagnosticHeader {
            schema: DIAGNOSTIC_SCHEMA.to_string(),
            seed,
            max_level,
            runs,
            corpus_checksum: corpus.checksum(),
        },
        instances: per_doc.into_iter().flatten().collect(),
    })
}

fn instances_for_document(
    doc: &Document,
    reference: &str,
    annotations: &crate::corpus::Annotations,
    ctx: &ErrorContext<'_>,
    max_level: u32,
    runs: u32,
    seed: u64,
) -> Vec<DiagnosticInstance> {
    let mut out = Vec::with_capacity((runs * max_level * 2) as usize);
    for run in 0..runs {
        for level in 1..=max_level {
            for subset in Subset::ALL {
                let (run_s, level_s) = (run.to_string(), level.to_string());
                let mut stream = rng::keyed(
                    seed,
                    &["diagnostic", &doc.id, &run_s, &level_s, subset.as_str()],
                );
                let mut working = WorkingSummary::new(reference, annotations.clone());
                let types = subset.error_types();
                for _ in 0..level {
                    let t = types[stream.random_range(0..types.len())];
                    apply_error(&mut working, t, ctx, &mut stream);
                }
                let (text, applied) = working.into_parts();
                out.push(DiagnosticInstance {
                    id: DiagnosticInstance::instance_id(&doc.id, run, level, subset),
                    doc_id: doc.id.clone(),
                    domain: doc.domain,
                    run,
                    level,
                    subset,
                    text,
                    applied,
                });
            }
        }
    }
    out
}

/// Average applied errors and share of transformed instances at one level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStat {
    pub level: u32,
    pub mean_applied: f64,
    pub pct_transformed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagStatsRow {
    pub domain: Domain,
    pub subset: Subset,
    pub levels: Vec<LevelStat>,
    /// Mean of the per-level transformed percentages.
    pub overall_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagStatsTable {
    pub rows: Vec<DiagStatsRow>,
}

impl DiagStatsTable {
    pub fn row(&self, domain: Domain, subset: Subset) -> Option<&DiagStatsRow> {
        self.rows
            .iter()
            .find(|r| r.domain == domain && r.subset == subset)
    }

    pub fn to_markdown(&self) -> String {
        let max_level = self
            .rows
            .iter()
            .flat_map(|r| r.levels.iter().map(|l| l.level))
            .max()
            .unwrap_or(0);
        let mut s = String::from("| Domain | Subset |");
        for l in 1..=max_level {
            let _ = write!(s, " Avg L{l} |");
        }
        for l in 1..=max_level {
            let _ = write!(s, " % L{l} |");
        }
        s.push_str(" % All |\n|---|---|");
        for _ in 0..(2 * max_level + 1) {
            s.push_str("---|");
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "| {} | {} |", r.domain, r.subset);
            for l in &r.levels {
                let _ = write!(s, " {:.2} |", l.mean_applied);
            }
            for l in &r.levels {
                let _ = write!(s, " {:.2} |", l.pct_transformed);
            }
            let _ = writeln!(s, " {:.2} |", r.overall_pct);
        }
        s
    }
}

/// Per (domain, subset): mean number of applied errors and percentage of
/// instances with at least one applied error at each level, each computed per
/// run and then averaged across runs.
pub fn diagnostic_stats(dataset: &DiagnosticDataset) -> Result<DiagStatsTable, PerturbError> {
    if dataset.is_empty() {
        return Err(PerturbError::EmptyDataset);
    }
    // (domain, subset) -> level -> run -> (sum applied, transformed, count)
    type Acc = BTreeMap<u32, BTreeMap<u32, (usize, usize, usize)>>;
    let mut acc: BTreeMap<(Domain, Subset), Acc> = BTreeMap::new();
    for inst in &dataset.instances {
        let cell = acc
            .entry((inst.domain, inst.subset))
            .or_default()
            .entry(inst.level)
            .or_default()
            .entry(inst.run)
            .or_default();
        cell.0 += inst.applied.len();
        cell.1 += usize::from(!inst.applied.is_empty());
        cell.2 += 1;
    }
    let rows = acc
        .into_iter()
        .map(|((domain, subset), levels)| {
            let levels: Vec<LevelStat> = levels
                .into_iter()
                .map(|(level, runs)| {
                    let n = runs.len() as f64;
                    let mean_applied = runs
                        .values()
                        .map(|&(sum, _, count)| sum as f64 / count as f64)
                        .sum::<f64>()
                        / n;
                    let pct_transformed = runs
                        .values()
                        .map(|&(_, t, count)| 100.0 * t as f64 / count as f64)
                        .sum::<f64>()
                        / n;
                    LevelStat {
                        level,
                        mean_applied,
                        pct_transformed,
                    }
                })
                .collect();
            let overall_pct =
                levels.iter().map(|l| l.pct_transformed).sum::<f64>() / levels.len() as f64;
            DiagStatsRow {
                domain,
                subset,
                levels,
                overall_pct,
            }
        })
        .collect();
    Ok(DiagStatsTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inst(level: u32, run: u32, applied: usize) -> DiagnosticInstance {
        DiagnosticInstance {
            id: format!("x/{level}/{run}/{applied}"),
            doc_id: "x".into(),
            domain: Domain::ShortNews,
            run,
            level,
            subset: Subset::Entity,
            text: String::new(),
            applied: (0..applied)
                .map(|_| AppliedError {
                    error_type: super::super::ErrorType::Pronoun,
                    start: 0,
                    end: 1,
                    original: "a".into(),
                    replacement: "b".into(),
                })
                .collect(),
        }
    }

    fn dataset(instances: Vec<DiagnosticInstance>) -> DiagnosticDataset {
        DiagnosticDataset {
            header: DiagnosticHeader {
                schema: DIAGNOSTIC_SCHEMA.into(),
                seed: 0,
                max_level: 3,
                runs: 2,
                corpus_checksum: "c".into(),
            },
            instances,
        }
    }

    #[test]
    fn saturated_dataset() {
        let ds = dataset(
            (1..=3)
                .flat_map(|l| (0..2).map(move |r| inst(l, r, l as usize)))
                .collect(),
        );
        let table = diagnostic_stats(&ds).unwrap();
        let row = table.row(Domain::ShortNews, Subset::Entity).unwrap();
        let means: Vec<f64> = row.levels.iter().map(|l| l.mean_applied).collect();
        assert_eq!(means, vec![1.0, 2.0, 3.0]);
        assert!(row.levels.iter().all(|l| l.pct_transformed == 100.0));
        assert_eq!(row.overall_pct, 100.0);
    }

    #[test]
    fn averaged_across_runs() {
        let ds = dataset(vec![inst(1, 0, 0), inst(1, 0, 1), inst(1, 1, 1)]);
        let table = diagnostic_stats(&ds).unwrap();
        let l1 = &table.rows[0].levels[0];
        assert!((l1.mean_applied - 0.75).abs() < 1e-12);
        assert!((l1.pct_transformed - 75.0).abs() < 1e-12);
        assert!(matches!(
            diagnostic_stats(&dataset(vec![])),
            Err(PerturbError::EmptyDataset)
        ));
    }

    #[test]
    fn file_round_trip() {
        let ds = dataset(vec![inst(1, 0, 1), inst(2, 1, 0)]);
        let text = ds.to_canonical_string();
        assert_eq!(parse_diagnostic(&text).unwrap(), ds);
        assert!(matches!(
            parse_diagnostic("{\"schema\":\"other\"}\n"),
            Err(PerturbError::Header { .. })
        ));
        let bad = format!("{}\n{{\"id\":1}}\n", text.lines().next().unwrap());
        assert!(matches!(
            parse_diagnostic(&bad),
            Err(PerturbError::Malformed { line: 2, .. })
        ));
    }
}
