//! Meta-evaluation statistics: level means and bounds, sensitivity (absolute
//! least-squares slope), Pearson correlation with two-tailed t-test p-values,
//! Welch tests between adjacent levels, boundedness, and the per-domain and
//! per-subset aggregation of the verdicts.

pub mod special;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Domain, HumanAnnotationRecord};
use crate::metrics::{random_item_id, reference_item_id, ScoreTable};
use crate::perturb::{DiagnosticDataset, ErrorType, Subset};
use crate::rng;

/// Significance threshold for the sensitivity verdict.
pub const ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("correlation is undefined: an input has zero variance")]
    ZeroVariance,
    #[error("metric {metric:?} has no usable score for {id:?}: {reason}")]
    MissingScore {
        metric: String,
        id: String,
        reason: String,
    },
    #[error("{0}")]
    InvalidParameter(String),
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn is_constant(xs: &[f64]) -> bool {
    xs.iter().all(|&x| x == xs[0])
}

/// Ordinary least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFewPoints {
            needed: 2,
            got: xs.len(),
        });
    }
    if is_constant(xs) {
        return Err(StatsError::ZeroVariance);
    }
    let (mx, my) = (mean(xs), mean(ys));
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// Pearson product-moment correlation. Zero variance in either input is an
/// error, never a silent 0.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    if xs.len() < 2 {
        return Err(StatsError::TooFewPoints {
            needed: 2,
            got: xs.len(),
        });
    }
    if is_constant(xs) || is_constant(ys) {
        return Err(StatsError::ZeroVariance);
    }
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Two-tailed p-value of `r` over `n` pairs, from t = r·√((n−2)/(1−r²)) with
/// n − 2 degrees of freedom.
pub fn p_value_pearson(r: f64, n: usize) -> Result<f64, StatsError> {
    if n < 3 {
        return Err(StatsError::TooFewPoints { needed: 3, got: n });
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(StatsError::InvalidParameter(format!(
            "r = {r} is outside [-1, 1]"
        )));
    }
    if r.abs() >= 1.0 {
        return Ok(0.0);
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    Ok(special::t_two_tailed(t, df))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelchTest {
    pub t: f64,
    pub p: f64,
    pub df: f64,
    /// Both samples have zero variance and different means.
    pub degenerate: bool,
}

/// Welch's unequal-variance t-test with Welch–Satterthwaite degrees of
/// freedom, two-tailed.
pub fn adjacent_level_test(a: &[f64], b: &[f64]) -> Result<WelchTest, StatsError> {
    let n = a.len().min(b.len());
    if n < 2 {
        return Err(StatsError::TooFewPoints { needed: 2, got: n });
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let va = a.iter().map(|x| (x - ma).powi(2)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|x| (x - mb).powi(2)).sum::<f64>() / (nb - 1.0);
    let (sa, sb) = (va / na, vb / nb);
    if (is_constant(a) && is_constant(b)) || sa + sb == 0.0 {
        return Ok(if ma == mb {
            WelchTest {
                t: 0.0,
                p: 1.0,
                df: na + nb - 2.0,
                degenerate: false,
            }
        } else {
            WelchTest {
                t: if ma > mb {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                p: 0.0,
                df: na + nb - 2.0,
                degenerate: true,
            }
        });
    }
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    Ok(WelchTest {
        t,
        p: special::t_two_tailed(t, df),
        df,
        degenerate: false,
    })
}

/// Which diagnostic instances a series is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeriesSubset {
    Entity,
    NonEntity,
    All,
}

impl SeriesSubset {
    pub fn includes(self, s: Subset) -> bool {
        match self {
            SeriesSubset::Entity => s == Subset::Entity,
            SeriesSubset::NonEntity => s == Subset::NonEntity,
            SeriesSubset::All => true,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SeriesSubset::Entity => "entity",
            SeriesSubset::NonEntity => "non-entity",
            SeriesSubset::All => "all",
        }
    }
}

impl From<Subset> for SeriesSubset {
    fn from(s: Subset) -> Self {
        match s {
            Subset::Entity => SeriesSubset::Entity,
            Subset::NonEntity => SeriesSubset::NonEntity,
        }
    }
}

impl fmt::Display for SeriesSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One scored summary: its actual number of applied errors and its value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub applied: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelMean {
    pub level: u32,
    pub mean: f64,
}

/// Per-level mean metric values plus bounds for one (metric, domain, subset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSeries {
    pub metric: String,
    pub domain: String,
    pub subset: SeriesSubset,
    /// Levels 0..=L; level 0 holds the references.
    pub level_means: Vec<LevelMean>,
    pub upper_bound: f64,
    pub lower_bound: f64,
    pub runs: u32,
    /// Raw samples per level (empty when built from published means).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub samples: BTreeMap<u32, Vec<Sample>>,
}

impl LevelSeries {
    /// Series from known means at levels 1..=L; level 0 is set to the upper
    /// bound.
    pub fn from_means(
        metric: &str,
        domain: &str,
        subset: SeriesSubset,
        means: &[f64],
        upper_bound: f64,
        lower_bound: f64,
    ) -> Self {
        let mut level_means = vec![LevelMean {
            level: 0,
            mean: upper_bound,
        }];
        level_means.extend(means.iter().enumerate().map(|(i, &m)| LevelMean {
            level: i as u32 + 1,
            mean: m,
        }));
        Self {
            metric: metric.to_string(),
            domain: domain.to_string(),
            subset,
            level_means,
            upper_bound,
            lower_bound,
            runs: 1,
            samples: BTreeMap::new(),
        }
    }

    pub fn max_level(&self) -> u32 {
        self.level_means.last().map(|l| l.level).unwrap_or(0)
    }

    /// Level means inside the fit window: 1..=L, or 0..=L when
    /// `include_level_zero`.
    pub fn window(&self, include_level_zero: bool) -> Vec<LevelMean> {
        self.level_means
            .iter()
            .copied()
            .filter(|l| include_level_zero || l.level >= 1)
            .collect()
    }

    pub fn grand_mean(&self, include_level_zero: bool) -> f64 {
        let w: Vec<f64> = self
            .window(include_level_zero)
            .iter()
            .map(|l| l.mean)
            .collect();
        mean(&w)
    }

    pub fn mean_at(&self, level: u32) -> Option<f64> {
        self.level_means
            .iter()
            .find(|l| l.level == level)
            .map(|l| l.mean)
    }
}

fn score(scores: &ScoreTable, metric: &str, id: &str) -> Result<f64, StatsError> {
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

/// Level means for one (metric, domain, subset). Levels ≥ 1 are averaged
/// within each run first and then across runs; level 0 and the upper bound
/// are the mean over reference summaries, the lower bound the mean over the
/// random pairings.
pub fn level_means(
    scores: &ScoreTable,
    dataset: &DiagnosticDataset,
    corpus: &Corpus,
    metric: &str,
    domain: Domain,
    subset: SeriesSubset,
) -> Result<LevelSeries, StatsError> {
    let docs: Vec<&str> = corpus
        .documents()
        .iter()
        .filter(|d| d.domain == domain)
        .map(|d| d.id.as_str())
        .collect();
    if docs.is_empty() {
        return Err(StatsError::InvalidParameter(format!(
            "no documents in domain {domain}"
        )));
    }
    let mut refs = Vec::with_capacity(docs.len());
    let mut randoms = Vec::with_capacity(docs.len());
    for d in &docs {
        refs.push(score(scores, metric, &reference_item_id(d))?);
        randoms.push(score(scores, metric, &random_item_id(d))?);
    }
    let upper = mean(&refs);
    let lower = mean(&randoms);

    let mut samples: BTreeMap<u32, Vec<Sample>> = BTreeMap::new();
    samples.insert(
        0,
        refs.iter()
            .map(|&value| Sample { applied: 0, value })
            .collect(),
    );
    let mut per_run: BTreeMap<u32, BTreeMap<u32, Vec<f64>>> = BTreeMap::new();
    for inst in dataset
        .instances
        .iter()
        .filter(|i| i.domain == domain && subset.includes(i.subset))
    {
        let value = score(scores, metric, &inst.id)?;
        samples.entry(inst.level).or_default().push(Sample {
            applied: inst.applied.len(),
            value,
        });
        per_run
            .entry(inst.level)
            .or_default()
            .entry(inst.run)
            .or_default()
            .push(value);
    }
    let mut level_means_out = vec![LevelMean {
        level: 0,
        mean: upper,
    }];
    for (level, runs) in &per_run {
        let run_means: Vec<f64> = runs.values().map(|v| mean(v)).collect();
        level_means_out.push(LevelMean {
            level: *level,
            mean: mean(&run_means),
        });
    }
    Ok(LevelSeries {
        metric: metric.to_string(),
        domain: domain.to_string(),
        subset,
        level_means: level_means_out,
        upper_bound: upper,
        lower_bound: lower,
        runs: dataset.header.runs,
        samples,
    })
}

/// |slope| of the least-squares line through the level means in the fit
/// window.
pub fn sensitivity(series: &LevelSeries, include_level_zero: bool) -> Result<f64, StatsError> {
    let w = series.window(include_level_zero);
    let xs: Vec<f64> = w.iter().map(|l| l.level as f64).collect();
    let ys: Vec<f64> = w.iter().map(|l| l.mean).collect();
    ols_slope(&xs, &ys).map(f64::abs)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundSide {
    Upper,
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub level: u32,
    pub mean: f64,
    pub bound: f64,
    pub side: BoundSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundedness {
    pub pass: bool,
    pub violations: Vec<Violation>,
}

/// Every level mean (levels ≥ 1) must lie in [lower, upper], up to a relative
/// tolerance of 1e-12.
pub fn check_boundedness(series: &LevelSeries) -> Boundedness {
    let tol = |b: f64| 1e-12 * b.abs().max(1.0);
    let mut violations = Vec::new();
    for l in series.level_means.iter().filter(|l| l.level >= 1) {
        if l.mean > series.upper_bound + tol(series.upper_bound) {
            violations.push(Violation {
                level: l.level,
                mean: l.mean,
                bound: series.upper_bound,
                side: BoundSide::Upper,
            });
        }
        if l.mean < series.lower_bound - tol(series.lower_bound) {
            violations.push(Violation {
                level: l.level,
                mean: l.mean,
                bound: series.lower_bound,
                side: BoundSide::Lower,
            });
        }
    }
    Boundedness {
        pass: violations.is_empty(),
        violations,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorrelationMode {
    /// Level against per-level mean (n = number of levels in the window).
    #[default]
    LevelMean,
    /// Actual applied-error count against each summary's value.
    PerSummary,
}

impl CorrelationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CorrelationMode::LevelMean => "level-mean",
            CorrelationMode::PerSummary => "per-summary",
        }
    }
}

/// A correlation with its p-value; `r`/`p` are absent when undefined, with
/// the reason in `note`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Correlation {
    pub fn compute(xs: &[f64], ys: &[f64]) -> Self {
        let n = xs.len();
        match pearson(xs, ys) {
            Ok(r) => match p_value_pearson(r, n) {
                Ok(p) => Self {
                    r: Some(r),
                    p: Some(p),
                    n,
                    note: None,
                },
                Err(e) => Self {
                    r: Some(r),
                    p: None,
                    n,
                    note: Some(e.to_string()),
                },
            },
            Err(e) => Self {
                r: None,
                p: None,
                n,
                note: Some(e.to_string()),
            },
        }
    }
}

/// Correlation between inconsistency level and metric value.
pub fn series_correlation(
    series: &LevelSeries,
    mode: CorrelationMode,
    include_level_zero: bool,
) -> Correlation {
    let (xs, ys): (Vec<f64>, Vec<f64>) = match mode {
        CorrelationMode::LevelMean => series
            .window(include_level_zero)
            .iter()
            .map(|l| (l.level as f64, l.mean))
            .unzip(),
        CorrelationMode::PerSummary => series
            .samples
            .iter()
            .filter(|(level, _)| include_level_zero || **level >= 1)
            .flat_map(|(_, s)| s.iter().map(|s| (s.applied as f64, s.value)))
            .unzip(),
    };
    Correlation::compute(&xs, &ys)
}

/// Per-summary correlation between human-annotated error level (ignoring
/// `exclude`d types) and metric value, over every annotated summary.
pub fn commonsense_correlation(
    scores: &ScoreTable,
    metric: &str,
    annotations: &[&HumanAnnotationRecord],
    exclude: &BTreeSet<ErrorType>,
) -> Result<Correlation, StatsError> {
    let mut pairs = Vec::with_capacity(annotations.len());
    for rec in annotations {
        let v = score(scores, metric, &rec.summary_id)?;
        pairs.push((rec.level_excluding(exclude) as f64, v));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let r = pearson(&xs, &ys)?;
    let p = p_value_pearson(r, xs.len())?;
    Ok(Correlation {
        r: Some(r),
        p: Some(p),
        n: xs.len(),
        note: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjacentTest {
    pub from: u32,
    pub to: u32,
    /// Absent when infinite (degenerate samples).
    pub t: Option<f64>,
    pub p: f64,
    pub df: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Flags {
    /// The level correlation is undefined or not significant at 0.05.
    pub insensitive: bool,
    /// r > 0: the metric rises as inconsistency rises.
    pub invalid_direction: bool,
}

/// Verdicts and statistics for one (metric, domain, subset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub metric: String,
    pub domain: String,
    pub subset: SeriesSubset,
    pub series: LevelSeries,
    pub bounded: Boundedness,
    pub include_level_zero: bool,
    /// Sensitivity over the configured window.
    pub sensitivity: Option<f64>,
    pub sensitivity_levels_1_to_l: Option<f64>,
    pub sensitivity_levels_0_to_l: Option<f64>,
    pub correlation_mode: CorrelationMode,
    pub correlation: Correlation,
    pub adjacent_tests: Vec<AdjacentTest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub commonsense: Option<Correlation>,
    pub flags: Flags,
}

impl ConditionReport {
    pub fn correlation_r(&self) -> Option<f64> {
        self.correlation.r
    }

    pub fn p_value(&self) -> Option<f64> {
        self.correlation.p
    }

    /// Conditions I and II both hold.
    pub fn passes(&self) -> bool {
        self.bounded.pass && !self.flags.insensitive && !self.flags.invalid_direction
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetaOptions {
    pub include_level_zero: bool,
    pub correlation_mode: CorrelationMode,
}

pub fn build_condition_report(
    series: LevelSeries,
    options: &MetaOptions,
    commonsense: Option<Correlation>,
) -> ConditionReport {
    let s1 = sensitivity(&series, false).ok();
    let s0 = sensitivity(&series, true).ok();
    let correlation = series_correlation(
        &series,
        options.correlation_mode,
        options.include_level_zero,
    );
    let first = if options.include_level_zero { 0 } else { 1 };
    let mut adjacent_tests = Vec::new();
    for from in first..series.max_level() {
        let (Some(a), Some(b)) = (series.samples.get(&from), series.samples.get(&(from + 1)))
        else {
            continue;
        };
        let a: Vec<f64> = a.iter().map(|s| s.value).collect();
        let b: Vec<f64> = b.iter().map(|s| s.value).collect();
        if let Ok(w) = adjacent_level_test(&a, &b) {
            adjacent_tests.push(AdjacentTest {
                from,
                to: from + 1,
                t: w.t.is_finite().then_some(w.t),
                p: w.p,
                df: w.df,
                degenerate: w.degenerate,
            });
        }
    }
    let flags = Flags {
        insensitive: correlation.p.is_none_or(|p| p > ALPHA),
        invalid_direction: correlation.r.is_some_and(|r| r > 0.0),
    };
    ConditionReport {
        metric: series.metric.clone(),
        domain: series.domain.clone(),
        subset: series.subset,
        bounded: check_boundedness(&series),
        include_level_zero: options.include_level_zero,
        sensitivity: if options.include_level_zero { s0 } else { s1 },
        sensitivity_levels_1_to_l: s1,
        sensitivity_levels_0_to_l: s0,
        correlation_mode: options.correlation_mode,
        correlation,
        adjacent_tests,
        commonsense,
        flags,
        series,
    }
}

/// Per metric: whether Conditions I–II hold in each domain (on every subset).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralityRow {
    pub metric: String,
    pub domains: BTreeMap<String, bool>,
    pub general: bool,
}

/// Per (metric, domain): whether Condition II holds on each subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub metric: String,
    pub domain: String,
    pub subsets: BTreeMap<SeriesSubset, bool>,
    pub robust: bool,
}

pub fn generality(reports: &[ConditionReport]) -> Vec<GeneralityRow> {
    let mut by_metric: BTreeMap<&str, BTreeMap<String, bool>> = BTreeMap::new();
    for r in reports {
        let cell = by_metric
            .entry(&r.metric)
            .or_default()
            .entry(r.domain.clone())
            .or_insert(true);
        *cell &= r.passes();
    }
    by_metric
        .into_iter()
        .map(|(metric, domains)| GeneralityRow {
            metric: metric.to_string(),
            general: domains.values().all(|&b| b),
            domains,
        })
        .collect()
}

pub fn robustness(reports: &[ConditionReport]) -> Vec<RobustnessRow> {
    let mut cells: BTreeMap<(&str, &str), BTreeMap<SeriesSubset, bool>> = BTreeMap::new();
    for r in reports {
        cells
            .entry((&r.metric, &r.domain))
            .or_default()
            .insert(r.subset, !r.flags.insensitive && !r.flags.invalid_direction);
    }
    cells
        .into_iter()
        .map(|((metric, domain), subsets)| RobustnessRow {
            metric: metric.to_string(),
            domain: domain.to_string(),
            robust: subsets.values().all(|&b| b),
            subsets,
        })
        .collect()
}

/// Everything the meta stage produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaResults {
    pub options: MetaOptions,
    pub reports: Vec<ConditionReport>,
    pub generality: Vec<GeneralityRow>,
    pub robustness: Vec<RobustnessRow>,
}

/// Reports for every metric × domain × subset, with commonsense correlations
/// attached where human annotations exist for that domain.
pub fn run_meta(
    scores: &ScoreTable,
    dataset: &DiagnosticDataset,
    corpus: &Corpus,
    metrics: &[String],
    annotations: Option<&[HumanAnnotationRecord]>,
    exclude: &BTreeSet<ErrorType>,
    options: MetaOptions,
) -> Result<MetaResults, StatsError> {
    let domains: BTreeSet<Domain> = corpus.documents().iter().map(|d| d.domain).collect();
    let doc_domain: HashMap<&str, Domain> = corpus
        .documents()
        .iter()
        .map(|d| (d.id.as_str(), d.domain))
        .collect();
    let mut reports = Vec::new();
    for metric in metrics {
        for &domain in &domains {
            let commonsense = match annotations {
                Some(all) => {
                    let recs: Vec<&HumanAnnotationRecord> = all
                        .iter()
                        .filter(|r| doc_domain.get(r.doc_id.as_str()) == Some(&domain))
                        .collect();
                    if recs.is_empty() {
                        None
                    } else {
                        Some(
                            match commonsense_correlation(scores, metric, &recs, exclude) {
                                Ok(c) => c,
                                Err(e @ StatsError::MissingScore { .. }) => return Err(e),
                                Err(e) => Correlation {
                                    r: None,
                                    p: None,
                                    n: recs.len(),
                                    note: Some(e.to_string()),
                                },
                            },
                        )
                    }
                }
                None => None,
            };
            for subset in Subset::ALL {
                let series = level_means(scores, dataset, corpus, metric, domain, subset.into())?;
                reports.push(build_condition_report(
                    series,
                    &options,
                    commonsense.clone(),
                ));
            }
        }
    }
    Ok(MetaResults {
        options,
        generality: generality(&reports),
        robustness: robustness(&reports),
        reports,
    })
}

/// Pairs each document with the document whose reference summary serves as
/// its random (lower-bound) summary: drawn uniformly from the other documents
/// of the same domain, or of the whole corpus when the domain has a single
/// document.
pub fn lower_bound_pairs(
    corpus: &Corpus,
    seed: u64,
) -> Result<BTreeMap<String, String>, StatsError> {
    if corpus.len() < 2 {
        return Err(StatsError::TooFewPoints {
            needed: 2,
            got: corpus.len(),
        });
    }
    let mut by_domain: BTreeMap<Domain, Vec<&str>> = BTreeMap::new();
    for d in corpus.documents() {
        by_domain.entry(d.domain).or_default().push(d.id.as_str());
    }
    let all: Vec<&str> = corpus.documents().iter().map(|d| d.id.as_str()).collect();
    let mut pairs = BTreeMap::new();
    for d in corpus.documents() {
        let pool = &by_domain[&d.domain];
        let pool = if pool.len() >= 2 { pool } else { &all };
        let others: Vec<&str> = pool.iter().copied().filter(|o| *o != d.id).collect();
        let mut stream = rng::keyed(seed, &["lower-bound", &d.id]);
        let chosen = others
            .choose(&mut stream)
            .expect("at least one other document");
        pairs.insert(d.id.clone(), chosen.to_string());
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn slope_and_sensitivity() {
        let s = LevelSeries::from_means("m", "d", SeriesSubset::Entity, &[3.0, 2.0, 1.0], 4.0, 0.0);
        assert!(close(sensitivity(&s, true).unwrap(), 1.0, 1e-12));
        assert!(close(sensitivity(&s, false).unwrap(), 1.0, 1e-12));
        let flat = LevelSeries::from_means("m", "d", SeriesSubset::Entity, &[0.5; 3], 0.5, 0.5);
        assert_eq!(sensitivity(&flat, false).unwrap(), 0.0);
        let one = LevelSeries::from_means("m", "d", SeriesSubset::Entity, &[0.5], 0.5, 0.5);
        assert!(matches!(
            sensitivity(&one, false),
            Err(StatsError::TooFewPoints { .. })
        ));
        assert!(close(s.grand_mean(false), 2.0, 1e-12));
    }

    #[test]
    fn pearson_basics() {
        assert!(close(
            pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(),
            -1.0,
            1e-12
        ));
        assert_eq!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(StatsError::ZeroVariance)
        );
        assert!(matches!(
            pearson(&[1.0], &[1.0, 2.0]),
            Err(StatsError::LengthMismatch(..))
        ));
    }

    #[test]
    fn p_values() {
        assert_eq!(p_value_pearson(1.0, 3).unwrap(), 0.0);
        assert_eq!(p_value_pearson(-1.0, 10).unwrap(), 0.0);
        assert!(p_value_pearson(0.5, 2).is_err());
        assert!(close(p_value_pearson(0.0, 10).unwrap(), 1.0, 1e-12));
    }

    #[test]
    fn welch_degenerate_cases() {
        let w = adjacent_level_test(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((w.t, w.p), (0.0, 1.0));
        let w = adjacent_level_test(&[0.0; 4], &[1.0; 4]).unwrap();
        assert!(w.degenerate);
        assert_eq!(w.p, 0.0);
        let w = adjacent_level_test(&[2.0; 4], &[2.0; 4]).unwrap();
        assert_eq!((w.t, w.p, w.degenerate), (0.0, 1.0, false));
        assert!(adjacent_level_test(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn boundedness() {
        let s = LevelSeries::from_means(
            "R-1",
            "xsum",
            SeriesSubset::NonEntity,
            &[10.76, 10.86, 10.92],
            10.61,
            6.72,
        );
        let b = check_boundedness(&s);
        assert!(!b.pass);
        assert_eq!(
            b.violations.iter().map(|v| v.level).collect::<Vec<_>>(),
            vec![1, 2, 3]
        );
        let c = LevelSeries::from_means("m", "d", SeriesSubset::Entity, &[0.5; 3], 0.5, 0.5);
        assert!(check_boundedness(&c).pass);
        let report = build_condition_report(s, &MetaOptions::default(), None);
        assert!(report.flags.invalid_direction);
        assert!(!report.passes());
    }

    #[test]
    fn constant_metric_is_flagged_not_passed() {
        let c = LevelSeries::from_means("m", "d", SeriesSubset::Entity, &[0.5; 3], 0.5, 0.5);
        let report = build_condition_report(c, &MetaOptions::default(), None);
        assert!(report.correlation.r.is_none());
        assert!(report.flags.insensitive);
        assert!(!report.flags.invalid_direction);
    }
}
