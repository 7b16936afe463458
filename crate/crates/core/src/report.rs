//! Result tables (comma-separated, markdown, JSON lines) and per-level score
//! distributions for external plotting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::HumanAnnotationRecord;
use crate::metastats::{
    ConditionReport, GeneralityRow, MetaResults, RobustnessRow, SeriesSubset, StatsError,
};
use crate::metrics::ScoreTable;
use crate::perturb::{DiagnosticDataset, ErrorType};

pub const REPORT_SCHEMA: &str = "factgauge.report/v1";
pub const DISTRIBUTION_SCHEMA: &str = "factgauge.distributions/v1";
pub const CSV_HEADER: &str = "domain,subset,metric,row,value,stars,flags";

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("unknown report format {0:?} (expected csv, markdown or jsonl)")]
    UnknownFormat(String),
    #[error("no display scale for metric {0:?}")]
    MissingScale(String),
    #[error("malformed report line {line}: {message}")]
    Malformed { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
    Jsonl,
}

impl Format {
    pub const ALL: [Format; 3] = [Format::Csv, Format::Markdown, Format::Jsonl];

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Markdown => "md",
            Format::Jsonl => "jsonl",
        }
    }
}

impl FromStr for Format {
    type Err = ReportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" | "delimited" | "delimited-table" => Ok(Format::Csv),
            "md" | "markdown" => Ok(Format::Markdown),
            "jsonl" | "structured" => Ok(Format::Jsonl),
            other => Err(ReportError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub schema: String,
    pub seed: u64,
    pub max_level: u32,
    pub runs: u32,
    pub corpus_checksum: String,
    pub tool_version: String,
    pub include_level_zero: bool,
    pub correlation_mode: String,
}

/// Text stand-ins for the highlight colours of the published tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowFlag {
    /// Highest sensitivity among valid metrics of the same domain and subset.
    Best,
    /// Lowest sensitivity among valid metrics of the same domain and subset.
    Worst,
    InvalidDirection,
    Insensitive,
    Unbounded,
}

impl RowFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            RowFlag::Best => "best",
            RowFlag::Worst => "worst",
            RowFlag::InvalidDirection => "invalid-direction",
            RowFlag::Insensitive => "insensitive",
            RowFlag::Unbounded => "unbounded",
        }
    }
}

/// One (metric, domain, subset) cell, copied from its `ConditionReport`.
/// Values are on the metric's native scale; `scale` is applied at render
/// time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub metric: String,
    pub domain: String,
    pub subset: SeriesSubset,
    pub scale: f64,
    pub upper: f64,
    /// Means at levels 1..=L.
    pub level_means: Vec<f64>,
    pub lower: f64,
    pub sensitivity: Option<f64>,
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub n: usize,
    pub stars: String,
    pub flags: Vec<RowFlag>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonsenseRow {
    pub metric: String,
    pub domain: String,
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub n: usize,
    pub stars: String,
}

/// Raw per-summary scores at one level. `domain` and `subset` are absent for
/// slices built from human annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSlice {
    pub metric: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<SeriesSubset>,
    pub level: u32,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub provenance: Provenance,
    pub rows: Vec<ReportRow>,
    pub commonsense: Vec<CommonsenseRow>,
    pub generality: Vec<GeneralityRow>,
    pub robustness: Vec<RobustnessRow>,
    pub distributions: Vec<DistributionSlice>,
}

/// `**` for p ≤ 0.01, `*` for 0.01 < p ≤ 0.05, nothing otherwise.
pub fn stars(p: Option<f64>) -> &'static str {
    match p {
        Some(p) if p <= 0.01 => "**",
        Some(p) if p <= 0.05 => "*",
        _ => "",
    }
}

fn row_from_report(report: &ConditionReport, scale: f64) -> ReportRow {
    let mut flags = Vec::new();
    if report.flags.invalid_direction {
        flags.push(RowFlag::InvalidDirection);
    }
    if report.flags.insensitive {
        flags.push(RowFlag::Insensitive);
    }
    if !report.bounded.pass {
        flags.push(RowFlag::Unbounded);
    }
    ReportRow {
        metric: report.metric.clone(),
        domain: report.domain.clone(),
        subset: report.subset,
        scale,
        upper: report.series.upper_bound,
        level_means: report
            .series
            .level_means
            .iter()
            .filter(|l| l.level >= 1)
            .map(|l| l.mean)
            .collect(),
        lower: report.series.lower_bound,
        sensitivity: report.sensitivity,
        r: report.correlation.r,
        p: report.correlation.p,
        n: report.correlation.n,
        stars: stars(report.correlation.p).to_string(),
        flags,
    }
}

// Best/worst by displayed sensitivity among rows whose direction is valid.
fn mark_best_worst(rows: &mut [ReportRow]) {
    let mut groups: BTreeMap<(String, SeriesSubset), Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        if r.sensitivity.is_some() && !r.flags.contains(&RowFlag::InvalidDirection) {
            groups
                .entry((r.domain.clone(), r.subset))
                .or_default()
                .push(i);
        }
    }
    for idx in groups.values().filter(|g| g.len() >= 2) {
        let key = |i: &usize| rows[*i].sensitivity.unwrap() * rows[*i].scale;
        let best = *idx.iter().max_by(|a, b| key(a).total_cmp(&key(b))).unwrap();
        let worst = *idx.iter().min_by(|a, b| key(a).total_cmp(&key(b))).unwrap();
        if key(&best) == key(&worst) {
            continue;
        }
        rows[best].flags.push(RowFlag::Best);
        rows[worst].flags.push(RowFlag::Worst);
    }
    for r in rows.iter_mut() {
        r.flags.sort();
    }
}

impl ReportBundle {
    /// Bundle from meta results; `scales` maps each metric to its display
    /// multiplier.
    pub fn from_meta(
        meta: &MetaResults,
        scales: &BTreeMap<String, f64>,
        provenance: Provenance,
        distributions: Vec<DistributionSlice>,
    ) -> Result<Self, ReportError> {
        let mut rows = Vec::with_capacity(meta.reports.len());
        let mut commonsense = Vec::new();
        let mut seen = BTreeSet::new();
        for report in &meta.reports {
            let scale = *scales
                .get(&report.metric)
                .ok_or_else(|| ReportError::MissingScale(report.metric.clone()))?;
            rows.push(row_from_report(report, scale));
            if let Some(c) = &report.commonsense {
                if seen.insert((report.metric.clone(), report.domain.clone())) {
                    commonsense.push(CommonsenseRow {
                        metric: report.metric.clone(),
                        domain: report.domain.clone(),
                        r: c.r,
                        p: c.p,
                        n: c.n,
                        stars: stars(c.p).to_string(),
                    });
                }
            }
        }
        mark_best_worst(&mut rows);
        Ok(Self {
            provenance,
            rows,
            commonsense,
            generality: meta.generality.clone(),
            robustness: meta.robustness.clone(),
            distributions,
        })
    }

    pub fn empty(provenance: Provenance) -> Self {
        Self {
            provenance,
            rows: Vec::new(),
            commonsense: Vec::new(),
            generality: Vec::new(),
            robustness: Vec::new(),
            distributions: Vec::new(),
        }
    }

    /// Parses the structured (JSON lines) rendering back into a bundle.
    pub fn from_jsonl(content: &str) -> Result<Self, ReportError> {
        let mut provenance = None;
        let mut bundle = None::<ReportBundle>;
        for (i, line) in content.lines().enumerate() {
            let line_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let rec: Record = serde_json::from_str(line).map_err(|e| ReportError::Malformed {
                line: line_no,
                message: e.to_string(),
            })?;
            if let Record::Provenance(p) = rec {
                if provenance.is_some() {
                    return Err(ReportError::Malformed {
                        line: line_no,
                        message: "second provenance record".into(),
                    });
                }
                provenance = Some(p.clone());
                bundle = Some(ReportBundle::empty(p));
                continue;
            }
            let b = bundle.as_mut().ok_or_else(|| ReportError::Malformed {
                line: line_no,
                message: "first record must be the provenance".into(),
            })?;
            match rec {
                Record::Provenance(_) => unreachable!(),
                Record::Row(r) => b.rows.push(r),
                Record::Commonsense(c) => b.commonsense.push(c),
                Record::Generality(g) => b.generality.push(g),
                Record::Robustness(r) => b.robustness.push(r),
                Record::Distribution(d) => b.distributions.push(d),
            }
        }
        bundle.ok_or(ReportError::Malformed {
            line: 0,
            message: "empty report".into(),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "kebab-case")]
enum Record {
    Provenance(Provenance),
    Row(ReportRow),
    Commonsense(CommonsenseRow),
    Generality(GeneralityRow),
    Robustness(RobustnessRow),
    Distribution(DistributionSlice),
}

// Half away from zero at two decimals, after snapping representation noise
// (0.2149999999999999 is shown as 0.22, like 0.215).
fn fixed2(v: f64) -> String {
    let snapped = (v * 1e8).round() / 1e6;
    let s = format!("{:.2}", snapped.round() / 100.0);
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

fn fmt_opt(v: Option<f64>, scale: f64) -> String {
    v.map(|v| fixed2(v * scale)).unwrap_or_else(|| "n/a".into())
}

/// Row labels and display values for one cell, in table order: upper bound,
/// levels 1..L, lower bound, sensitivity, correlation, p-value.
fn cell_lines(row: &ReportRow) -> Vec<(String, String, &'static str)> {
    let s = row.scale;
    let mut out = vec![("upper-bound".to_string(), fixed2(row.upper * s), "")];
    for (i, m) in row.level_means.iter().enumerate() {
        out.push((format!("level-{}", i + 1), fixed2(m * s), ""));
    }
    out.push(("lower-bound".into(), fixed2(row.lower * s), ""));
    out.push(("sensitivity".into(), fmt_opt(row.sensitivity, s), ""));
    out.push(("correlation".into(), fmt_opt(row.r, 1.0), ""));
    out.push(("p-value".into(), fmt_opt(row.p, 1.0), stars(row.p)));
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn flag_list(flags: &[RowFlag]) -> String {
    flags
        .iter()
        .map(|f| f.as_str())
        .collect::<Vec<_>>()
        .join(";")
}

fn render_csv(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in &bundle.rows {
        let flags = flag_list(&row.flags);
        for (label, value, st) in cell_lines(row) {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                csv_field(&row.domain),
                row.subset,
                csv_field(&row.metric),
                label,
                value,
                st,
                flags
            );
        }
    }
    out
}

fn md_label(label: &str) -> String {
    match label {
        "upper-bound" => "Upper Bound".into(),
        "lower-bound" => "Lower Bound".into(),
        "sensitivity" => "Sensitivity".into(),
        "correlation" => "Correlation".into(),
        "p-value" => "p-value".into(),
        l => match l.strip_prefix("level-") {
            Some(n) => format!("Level {n}"),
            None => l.to_string(),
        },
    }
}

fn md_escape(s: &str) -> String {
    s.replace('|', "\\|")
}

fn render_markdown(bundle: &ReportBundle) -> String {
    let p = &bundle.provenance;
    let mut out = String::new();
    let _ = writeln!(out, "# Meta-evaluation report\n");
    let _ = writeln!(
        out,
        "seed {}, levels 1..{}, {} runs, corpus {}, factgauge {}, correlation {}, fit window {}\n",
        p.seed,
        p.max_level,
        p.runs,
        p.corpus_checksum,
        p.tool_version,
        p.correlation_mode,
        if p.include_level_zero { "0..L" } else { "1..L" }
    );
    let mut domains: Vec<&str> = Vec::new();
    for r in &bundle.rows {
        if !domains.contains(&r.domain.as_str()) {
            domains.push(&r.domain);
        }
    }
    for domain in domains {
        let rows: Vec<&ReportRow> = bundle.rows.iter().filter(|r| r.domain == domain).collect();
        let mut metrics: Vec<&str> = Vec::new();
        for r in &rows {
            if !metrics.contains(&r.metric.as_str()) {
                metrics.push(&r.metric);
            }
        }
        let mut subsets: Vec<SeriesSubset> = rows.iter().map(|r| r.subset).collect();
        subsets.sort();
        subsets.dedup();
        let subset_names: Vec<&str> = subsets.iter().map(|s| s.as_str()).collect();
        let _ = writeln!(
            out,
            "## {} ({})\n",
            md_escape(domain),
            subset_names.join(" / ")
        );
        let _ = write!(out, "|  |");
        for m in &metrics {
            let _ = write!(out, " {} |", md_escape(m));
        }
        out.push('\n');
        out.push_str("|---|");
        for _ in &metrics {
            out.push_str("---|");
        }
        out.push('\n');
        // metric -> subset -> (row label, value, stars) lines, if the cell exists
        type Cell<'a> = Option<Vec<(String, String, &'a str)>>;
        let cells: Vec<Vec<Cell>> = metrics
            .iter()
            .map(|m| {
                subsets
                    .iter()
                    .map(|s| {
                        rows.iter()
                            .find(|r| r.metric == *m && r.subset == *s)
                            .map(|r| cell_lines(r))
                    })
                    .collect()
            })
            .collect();
        let labels: Vec<String> = cells
            .iter()
            .flatten()
            .flatten()
            .max_by_key(|c| c.len())
            .map(|c| c.iter().map(|(l, _, _)| l.clone()).collect())
            .unwrap_or_default();
        for (li, label) in labels.iter().enumerate() {
            let _ = write!(out, "| {} |", md_label(label));
            for per_metric in &cells {
                let parts: Vec<String> = per_metric
                    .iter()
                    .map(|c| {
                        c.as_ref()
                            .and_then(|c| c.get(li))
                            .map(|(_, v, st)| format!("{v}{st}"))
                            .unwrap_or_else(|| "n/a".into())
                    })
                    .collect();
                let bound_row = label == "upper-bound" || label == "lower-bound";
                let text = if bound_row && parts.iter().all(|p| p == &parts[0]) {
                    parts[0].clone()
                } else {
                    parts.join(" / ")
                };
                let _ = write!(out, " {text} |");
            }
            out.push('\n');
        }
        let flagged: Vec<&&ReportRow> = rows.iter().filter(|r| !r.flags.is_empty()).collect();
        if !flagged.is_empty() {
            out.push('\n');
            for r in flagged {
                let names: Vec<&str> = r.flags.iter().map(|f| f.as_str()).collect();
                let _ = writeln!(
                    out,
                    "- {} ({}): {}",
                    md_escape(&r.metric),
                    r.subset,
                    names.join(", ")
                );
            }
        }
        out.push('\n');
    }
    if !bundle.commonsense.is_empty() {
        out.push_str("## Correlation with human judgements\n\n| metric | domain | r | p | n |\n|---|---|---|---|---|\n");
        for c in &bundle.commonsense {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {}{} | {} |",
                md_escape(&c.metric),
                md_escape(&c.domain),
                fmt_opt(c.r, 1.0),
                fmt_opt(c.p, 1.0),
                c.stars,
                c.n
            );
        }
        out.push('\n');
    }
    if !bundle.generality.is_empty() {
        out.push_str("## Generality\n\n| metric | passing domains | general |\n|---|---|---|\n");
        for g in &bundle.generality {
            let passing: Vec<&str> = g
                .domains
                .iter()
                .filter(|(_, ok)| **ok)
                .map(|(d, _)| d.as_str())
                .collect();
            let _ = writeln!(
                out,
                "| {} | {} | {} |",
                md_escape(&g.metric),
                if passing.is_empty() {
                    "none".to_string()
                } else {
                    passing.join(", ")
                },
                if g.general { "yes" } else { "no" }
            );
        }
        out.push('\n');
    }
    if !bundle.robustness.is_empty() {
        out.push_str(
            "## Robustness\n\n| metric | domain | subsets passing | robust |\n|---|---|---|---|\n",
        );
        for r in &bundle.robustness {
            let passing: Vec<&str> = r
                .subsets
                .iter()
                .filter(|(_, ok)| **ok)
                .map(|(s, _)| s.as_str())
                .collect();
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} |",
                md_escape(&r.metric),
                md_escape(&r.domain),
                if passing.is_empty() {
                    "none".to_string()
                } else {
                    passing.join(", ")
                },
                if r.robust { "yes" } else { "no" }
            );
        }
        out.push('\n');
    }
    out
}

fn render_jsonl(bundle: &ReportBundle) -> String {
    let mut out = String::new();
    let mut push = |rec: Record| {
        out.push_str(&serde_json::to_string(&rec).expect("report records serialize"));
        out.push('\n');
    };
    push(Record::Provenance(bundle.provenance.clone()));
    bundle
        .rows
        .iter()
        .for_each(|r| push(Record::Row(r.clone())));
    bundle
        .commonsense
        .iter()
        .for_each(|c| push(Record::Commonsense(c.clone())));
    bundle
        .generality
        .iter()
        .for_each(|g| push(Record::Generality(g.clone())));
    bundle
        .robustness
        .iter()
        .for_each(|r| push(Record::Robustness(r.clone())));
    bundle
        .distributions
        .iter()
        .for_each(|d| push(Record::Distribution(d.clone())));
    out
}

/// Deterministic rendering of `bundle`.
pub fn render(bundle: &ReportBundle, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => render_csv(bundle),
        Format::Markdown => render_markdown(bundle),
        Format::Jsonl => render_jsonl(bundle),
    }
    .into_bytes()
}

fn value_of(scores: &ScoreTable, metric: &str, id: &str) -> Result<f64, StatsError> {
    match scores.get(metric, id) {
        Some(Ok(v)) => Ok(*v),
        Some(Err(e)) => Err(StatsError::MissingScore {
            metric: metric.into(),
            id: id.into(),
            reason: e.clone(),
        }),
        None => Err(StatsError::MissingScore {
            metric: metric.into(),
            id: id.into(),
            reason: "not scored".into(),
        }),
    }
}

/// Raw scores per (metric, domain, subset, level) over the diagnostic
/// instances, in dataset order.
pub fn dataset_distributions(
    scores: &ScoreTable,
    dataset: &DiagnosticDataset,
    metrics: &[String],
) -> Result<Vec<DistributionSlice>, StatsError> {
    let mut out = Vec::new();
    for metric in metrics {
        let mut groups: BTreeMap<(String, SeriesSubset, u32), Vec<f64>> = BTreeMap::new();
        for inst in &dataset.instances {
            groups
                .entry((inst.domain.to_string(), inst.subset.into(), inst.level))
                .or_default()
                .push(value_of(scores, metric, &inst.id)?);
        }
        out.extend(
            groups
                .into_iter()
                .map(|((domain, subset, level), values)| DistributionSlice {
                    metric: metric.clone(),
                    domain: Some(domain),
                    subset: Some(subset),
                    level,
                    values,
                }),
        );
    }
    Ok(out)
}

/// Raw scores of annotated summaries per (metric, human error level), the
/// level counted without the `exclude`d error types.
pub fn annotation_distributions(
    scores: &ScoreTable,
    annotations: &[HumanAnnotationRecord],
    metrics: &[String],
    exclude: &BTreeSet<ErrorType>,
) -> Result<Vec<DistributionSlice>, StatsError> {
    let mut out = Vec::new();
    for metric in metrics {
        let mut groups: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for rec in annotations {
            groups
                .entry(rec.level_excluding(exclude))
                .or_default()
                .push(value_of(scores, metric, &rec.summary_id)?);
        }
        out.extend(groups.into_iter().map(|(level, values)| DistributionSlice {
            metric: metric.clone(),
            domain: None,
            subset: None,
            level,
            values,
        }));
    }
    Ok(out)
}

/// The distribution file: a header line followed by one slice per line.
pub fn emit_distributions(slices: &[DistributionSlice]) -> String {
    let mut out = serde_json::json!({ "schema": DISTRIBUTION_SCHEMA }).to_string();
    out.push('\n');
    for s in slices {
        out.push_str(&serde_json::to_string(s).expect("slices serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_distributions(content: &str) -> Result<Vec<DistributionSlice>, ReportError> {
    let mut lines = content.lines().enumerate();
    match lines.next() {
        Some((_, header)) => {
            let v: serde_json::Value =
                serde_json::from_str(header).map_err(|e| ReportError::Malformed {
                    line: 1,
                    message: e.to_string(),
                })?;
            if v.get("schema").and_then(|s| s.as_str()) != Some(DISTRIBUTION_SCHEMA) {
                return Err(ReportError::Malformed {
                    line: 1,
                    message: format!("expected schema {DISTRIBUTION_SCHEMA}"),
                });
            }
        }
        None => {
            return Err(ReportError::Malformed {
                line: 0,
                message: "empty file".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ReportError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
