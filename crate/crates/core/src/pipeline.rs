//! Run configuration and the file-based stages: stats, perturb, score, meta
//! and report. Each stage reads the files of the stages before it from the
//! output directory and writes its own.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    corpus_stats, load_corpus, load_human_annotations, sample_eval_set, Corpus,
    HumanAnnotationRecord,
};
use crate::metastats::{lower_bound_pairs, run_meta, CorrelationMode, MetaOptions, MetaResults};
use crate::metrics::protocol::timeout_from_env;
use crate::metrics::{
    build_items, score_with_descriptors, validate_manifest, MetricDescriptor, ScoreTable,
};
use crate::perturb::{
    diagnostic_stats, generate_diagnostic, load_diagnostic, DiagnosticDataset, ErrorType,
};
use crate::report::{
    annotation_distributions, dataset_distributions, emit_distributions, render, Format,
    Provenance, ReportBundle, REPORT_SCHEMA,
};
use crate::taggers::{annotate, LexiconSet};

pub const STATS_JSON: &str = "stats.json";
pub const STATS_MD: &str = "stats.md";
pub const DIAGNOSTIC_FILE: &str = "diagnostic.jsonl";
pub const DIAGNOSTIC_STATS_JSON: &str = "diagnostic_stats.json";
pub const DIAGNOSTIC_STATS_MD: &str = "diagnostic_stats.md";
pub const SCORES_FILE: &str = "scores.jsonl";
pub const META_FILE: &str = "meta.json";
pub const REPORT_STEM: &str = "report";
pub const DISTRIBUTIONS_FILE: &str = "distributions.jsonl";

fn default_max_level() -> u32 {
    3
}
fn default_runs() -> u32 {
    5
}
fn default_workers() -> usize {
    1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_exclude() -> Vec<ErrorType> {
    vec![ErrorType::Other, ErrorType::FalseQuote]
}
fn default_metrics() -> Vec<MetricDescriptor> {
    ["rouge-1", "rouge-2", "rouge-l"]
        .into_iter()
        .map(MetricDescriptor::native)
        .collect()
}

/// Contents of the TOML configuration file. Relative paths are resolved
/// against the directory holding the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: PathBuf,
    #[serde(default)]
    pub human_annotations: Option<PathBuf>,
    #[serde(default)]
    pub antonyms: Option<PathBuf>,
    #[serde(default)]
    pub gazetteer: Option<PathBuf>,
    /// Sample this many documents from the corpus before anything else.
    #[serde(default)]
    pub eval_sample: Option<usize>,
    #[serde(default = "default_max_level")]
    pub max_level: u32,
    #[serde(default = "default_runs")]
    pub runs: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub include_level_zero: bool,
    #[serde(default)]
    pub correlation_mode: CorrelationMode,
    /// Error types left out of the human error level.
    #[serde(default = "default_exclude")]
    pub commonsense_exclude: Vec<ErrorType>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricDescriptor>,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub include_level_zero: bool,
    pub correlation_mode: Option<CorrelationMode>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: Stage, message: String },
}

impl PipelineError {
    /// 2 for configuration errors, 1 for stage failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { .. } => 1,
        }
    }
}

impl RunConfig {
    pub fn minimal(corpus: impl Into<PathBuf>, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            corpus: corpus.into(),
            human_annotations: None,
            antonyms: None,
            gazetteer: None,
            eval_sample: None,
            max_level: default_max_level(),
            runs: default_runs(),
            seed: 0,
            workers: default_workers(),
            output_dir: output_dir.into(),
            include_level_zero: false,
            correlation_mode: CorrelationMode::default(),
            commonsense_exclude: default_exclude(),
            metrics: default_metrics(),
        }
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig =
            toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus);
        fix(&mut self.output_dir);
        for p in [
            &mut self.human_annotations,
            &mut self.antonyms,
            &mut self.gazetteer,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(w) = o.workers {
            self.workers = w;
        }
        if o.include_level_zero {
            self.include_level_zero = true;
        }
        if let Some(m) = o.correlation_mode {
            self.correlation_mode = m;
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.max_level < 1 {
            return bad("max_level must be at least 1".into());
        }
        if self.runs < 1 {
            return bad("runs must be at least 1".into());
        }
        if self.workers < 1 {
            return bad("workers must be at least 1".into());
        }
        if self.eval_sample == Some(0) {
            return bad("eval_sample must be at least 1".into());
        }
        let must_exist = |what: &str, p: &Path| {
            if p.is_file() {
                Ok(())
            } else {
                Err(PipelineError::Config(format!(
                    "{what} {} does not exist",
                    p.display()
                )))
            }
        };
        must_exist("corpus", &self.corpus)?;
        for (what, p) in [
            ("human annotations", &self.human_annotations),
            ("antonym file", &self.antonyms),
            ("gazetteer", &self.gazetteer),
        ] {
            if let Some(p) = p {
                must_exist(what, p)?;
            }
        }
        if self.output_dir.exists() && !self.output_dir.is_dir() {
            return bad(format!(
                "output_dir {} is not a directory",
                self.output_dir.display()
            ));
        }
        if self.metrics.is_empty() {
            return bad("no metrics configured".into());
        }
        validate_manifest(&self.metrics).map_err(|e| PipelineError::Config(e.to_string()))?;
        timeout_from_env().map_err(PipelineError::Config)?;
        Ok(())
    }

    pub fn metric_names(&self) -> Vec<String> {
        self.metrics.iter().map(|m| m.name.clone()).collect()
    }

    fn meta_options(&self) -> MetaOptions {
        MetaOptions {
            include_level_zero: self.include_level_zero,
            correlation_mode: self.correlation_mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Stats,
    Perturb,
    Score,
    Meta,
    Report,
    All,
}

impl Stage {
    pub const CHAIN: [Stage; 5] = [
        Stage::Stats,
        Stage::Perturb,
        Stage::Score,
        Stage::Meta,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Stats => "stats",
            Stage::Perturb => "perturb",
            Stage::Score => "score",
            Stage::Meta => "meta",
            Stage::Report => "report",
            Stage::All => "all",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::CHAIN
            .into_iter()
            .chain([Stage::All])
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

struct Inputs {
    corpus: Corpus,
    lexicons: LexiconSet,
}

fn fail(stage: Stage) -> impl Fn(String) -> PipelineError {
    move |message| PipelineError::Stage { stage, message }
}

fn load_inputs(cfg: &RunConfig, stage: Stage) -> Result<Inputs, PipelineError> {
    let err = fail(stage);
    let lexicons = LexiconSet::load(cfg.antonyms.as_deref(), cfg.gazetteer.as_deref())
        .map_err(|e| err(e.to_string()))?;
    let corpus = load_corpus(&cfg.corpus, false).map_err(|e| err(e.to_string()))?;
    let corpus = match cfg.eval_sample {
        Some(n) => sample_eval_set(&corpus, n, cfg.seed).map_err(|e| err(e.to_string()))?,
        None => corpus,
    };
    let corpus = corpus.annotate_missing(|t| annotate(t, &lexicons).unwrap_or_default());
    Ok(Inputs { corpus, lexicons })
}

fn load_annotations(
    cfg: &RunConfig,
    stage: Stage,
) -> Result<Option<Vec<HumanAnnotationRecord>>, PipelineError> {
    cfg.human_annotations
        .as_deref()
        .map(|p| load_human_annotations(p).map_err(|e| fail(stage)(e.to_string())))
        .transpose()
}

fn write_file(
    dir: &Path,
    name: &str,
    bytes: &[u8],
    stage: Stage,
) -> Result<PathBuf, PipelineError> {
    let err = fail(stage);
    fs::create_dir_all(dir).map_err(|e| err(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| err(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, &path).map_err(|e| err(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn read_diagnostic(cfg: &RunConfig, stage: Stage) -> Result<DiagnosticDataset, PipelineError> {
    load_diagnostic(&cfg.output_dir.join(DIAGNOSTIC_FILE)).map_err(|e| {
        fail(stage)(format!(
            "{DIAGNOSTIC_FILE}: {e} (run the perturb stage first)"
        ))
    })
}

fn read_scores(cfg: &RunConfig, stage: Stage) -> Result<ScoreTable, PipelineError> {
    ScoreTable::load(&cfg.output_dir.join(SCORES_FILE))
        .map_err(|e| fail(stage)(format!("{SCORES_FILE}: {e} (run the score stage first)")))
}

fn stage_stats(cfg: &RunConfig) -> Result<(), PipelineError> {
    let stage = Stage::Stats;
    let inputs = load_inputs(cfg, stage)?;
    let table = corpus_stats(&inputs.corpus).map_err(|e| fail(stage)(e.to_string()))?;
    let json = serde_json::to_string_pretty(&table).expect("stats serialize") + "\n";
    write_file(&cfg.output_dir, STATS_JSON, json.as_bytes(), stage)?;
    write_file(
        &cfg.output_dir,
        STATS_MD,
        table.to_markdown().as_bytes(),
        stage,
    )?;
    Ok(())
}

fn stage_perturb(cfg: &RunConfig) -> Result<(), PipelineError> {
    let stage = Stage::Perturb;
    let err = fail(stage);
    let inputs = load_inputs(cfg, stage)?;
    let dataset = generate_diagnostic(
        &inputs.corpus,
        cfg.max_level,
        cfg.runs,
        cfg.seed,
        &inputs.lexicons,
        cfg.workers,
    )
    .map_err(|e| err(e.to_string()))?;
    write_file(
        &cfg.output_dir,
        DIAGNOSTIC_FILE,
        dataset.to_canonical_string().as_bytes(),
        stage,
    )?;
    let stats = diagnostic_stats(&dataset).map_err(|e| err(e.to_string()))?;
    let json = serde_json::to_string_pretty(&stats).expect("stats serialize") + "\n";
    write_file(
        &cfg.output_dir,
        DIAGNOSTIC_STATS_JSON,
        json.as_bytes(),
        stage,
    )?;
    write_file(
        &cfg.output_dir,
        DIAGNOSTIC_STATS_MD,
        stats.to_markdown().as_bytes(),
        stage,
    )?;
    Ok(())
}

fn stage_score(cfg: &RunConfig) -> Result<(), PipelineError> {
    let stage = Stage::Score;
    let err = fail(stage);
    let inputs = load_inputs(cfg, stage)?;
    let dataset = read_diagnostic(cfg, stage)?;
    if dataset.header.corpus_checksum != inputs.corpus.checksum() {
        return Err(err(format!(
            "{DIAGNOSTIC_FILE} was generated from a different corpus"
        )));
    }
    let pairs = lower_bound_pairs(&inputs.corpus, cfg.seed).map_err(|e| err(e.to_string()))?;
    let items =
        build_items(&inputs.corpus, Some(&dataset), &pairs).map_err(|e| err(e.to_string()))?;
    let timeout: Duration = timeout_from_env().map_err(&err)?;
    let table = score_with_descriptors(&cfg.metrics, &items, cfg.workers, timeout)
        .map_err(|e| err(e.to_string()))?;
    write_file(
        &cfg.output_dir,
        SCORES_FILE,
        table.to_canonical_string().as_bytes(),
        stage,
    )?;
    Ok(())
}

fn excluded(cfg: &RunConfig) -> BTreeSet<ErrorType> {
    cfg.commonsense_exclude.iter().copied().collect()
}

fn stage_meta(cfg: &RunConfig) -> Result<(), PipelineError> {
    let stage = Stage::Meta;
    let inputs = load_inputs(cfg, stage)?;
    let dataset = read_diagnostic(cfg, stage)?;
    let scores = read_scores(cfg, stage)?;
    let annotations = load_annotations(cfg, stage)?;
    let results = run_meta(
        &scores,
        &dataset,
        &inputs.corpus,
        &cfg.metric_names(),
        annotations.as_deref(),
        &excluded(cfg),
        cfg.meta_options(),
    )
    .map_err(|e| fail(stage)(e.to_string()))?;
    let json = serde_json::to_string_pretty(&results).expect("meta results serialize") + "\n";
    write_file(&cfg.output_dir, META_FILE, json.as_bytes(), stage)?;
    Ok(())
}

pub fn load_meta(path: &Path) -> Result<MetaResults, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn stage_report(cfg: &RunConfig) -> Result<(), PipelineError> {
    let stage = Stage::Report;
    let err = fail(stage);
    let meta = load_meta(&cfg.output_dir.join(META_FILE))
        .map_err(|e| err(format!("{e} (run the meta stage first)")))?;
    let dataset = read_diagnostic(cfg, stage)?;
    let scores = read_scores(cfg, stage)?;
    let annotations = load_annotations(cfg, stage)?;
    let names = cfg.metric_names();
    let mut slices =
        dataset_distributions(&scores, &dataset, &names).map_err(|e| err(e.to_string()))?;
    if let Some(a) = &annotations {
        slices.extend(
            annotation_distributions(&scores, a, &names, &excluded(cfg))
                .map_err(|e| err(e.to_string()))?,
        );
    }
    let scales: BTreeMap<String, f64> = cfg
        .metrics
        .iter()
        .map(|m| (m.name.clone(), m.display_scale()))
        .collect();
    let provenance = Provenance {
        schema: REPORT_SCHEMA.into(),
        seed: dataset.header.seed,
        max_level: dataset.header.max_level,
        runs: dataset.header.runs,
        corpus_checksum: dataset.header.corpus_checksum.clone(),
        tool_version: env!("CARGO_PKG_VERSION").into(),
        include_level_zero: meta.options.include_level_zero,
        correlation_mode: meta.options.correlation_mode.as_str().into(),
    };
    let bundle = ReportBundle::from_meta(&meta, &scales, provenance, Vec::new())
        .map_err(|e| err(e.to_string()))?;
    for format in Format::ALL {
        let name = format!("{REPORT_STEM}.{}", format.extension());
        write_file(&cfg.output_dir, &name, &render(&bundle, format), stage)?;
    }
    write_file(
        &cfg.output_dir,
        DISTRIBUTIONS_FILE,
        emit_distributions(&slices).as_bytes(),
        stage,
    )?;
    Ok(())
}

/// Validates `cfg` and runs `stage` (or the whole chain for `All`).
pub fn run_stage(stage: Stage, cfg: &RunConfig) -> Result<(), PipelineError> {
    cfg.validate()?;
    let chain: Vec<Stage> = if stage == Stage::All {
        Stage::CHAIN.to_vec()
    } else {
        vec![stage]
    };
    for st in chain {
        match st {
            Stage::Stats => stage_stats(cfg)?,
            Stage::Perturb => stage_perturb(cfg)?,
            Stage::Score => stage_score(cfg)?,
            Stage::Meta => stage_meta(cfg)?,
            Stage::Report => stage_report(cfg)?,
            Stage::All => unreachable!(),
        }
    }
    Ok(())
}
