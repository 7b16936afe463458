use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use factgauge::corpus::{
    toy_corpus, write_human_annotations, Corpus, HumanAnnotationRecord, Judgement, SummaryKind,
    SummaryRecord,
};
use factgauge::metastats::SeriesSubset;
use factgauge::metrics::ScoreTable;
use factgauge::perturb::load_diagnostic;
use factgauge::perturb::ErrorType;
use factgauge::pipeline::{
    load_meta, run_stage, RunConfig, Stage, DIAGNOSTIC_FILE, DIAGNOSTIC_STATS_JSON,
    DIAGNOSTIC_STATS_MD, DISTRIBUTIONS_FILE, META_FILE, SCORES_FILE, STATS_JSON, STATS_MD,
};
use factgauge::report::{parse_distributions, render, Format, ReportBundle};

fn toy_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy_corpus.jsonl")
}

fn config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::minimal(toy_path(), out);
    cfg.seed = 3;
    cfg.workers = 2;
    cfg
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn full_run_writes_valid_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = config(&out);
    run_stage(Stage::All, &cfg).unwrap();

    for f in [
        STATS_JSON,
        STATS_MD,
        DIAGNOSTIC_STATS_JSON,
        DIAGNOSTIC_STATS_MD,
        "report.csv",
        "report.md",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let dataset = load_diagnostic(&out.join(DIAGNOSTIC_FILE)).unwrap();
    assert_eq!(dataset.len(), 20 * 3 * 5 * 2);
    let scores = ScoreTable::load(&out.join(SCORES_FILE)).unwrap();
    assert_eq!(scores.metrics(), ["rouge-1", "rouge-2", "rouge-l"]);
    assert_eq!(scores.ids().len(), 20 * 2 + dataset.len());
    let meta = load_meta(&out.join(META_FILE)).unwrap();
    assert_eq!(meta.reports.len(), 3 * 3 * 2);

    let bundle =
        ReportBundle::from_jsonl(&fs::read_to_string(out.join("report.jsonl")).unwrap()).unwrap();
    assert_eq!(bundle.provenance.seed, 3);
    assert_eq!(bundle.provenance.max_level, 3);
    assert_eq!(bundle.rows.len(), meta.reports.len());
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "domain,subset,metric,row,value,stars,flags"
    );
    assert_eq!(csv.lines().count(), 1 + bundle.rows.len() * (5 + 3));

    // rendering the parsed bundle again reproduces the files on disk
    for format in Format::ALL {
        let on_disk = fs::read(out.join(format!("report.{}", format.extension()))).unwrap();
        assert_eq!(render(&bundle, format), on_disk, "{format:?}");
    }

    let slices =
        parse_distributions(&fs::read_to_string(out.join(DISTRIBUTIONS_FILE)).unwrap()).unwrap();
    let slice = slices
        .iter()
        .find(|s| {
            s.metric == "rouge-1"
                && s.domain.as_deref() == Some("dialogue")
                && s.subset == Some(SeriesSubset::Entity)
                && s.level == 1
        })
        .unwrap();
    let row = bundle
        .rows
        .iter()
        .find(|r| {
            r.metric == "rouge-1" && r.domain == "dialogue" && r.subset == SeriesSubset::Entity
        })
        .unwrap();
    let mean = slice.values.iter().sum::<f64>() / slice.values.len() as f64;
    assert_eq!(slice.values.len(), 6 * 5);
    assert!((mean - row.level_means[0]).abs() < 1e-12);
}

#[test]
fn stages_are_idempotent_and_match_the_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let chained = tmp.path().join("chained");
    run_stage(Stage::All, &config(&chained)).unwrap();
    let first = snapshot(&chained);
    run_stage(Stage::All, &config(&chained)).unwrap();
    assert_eq!(snapshot(&chained), first);

    let stepwise = tmp.path().join("stepwise");
    for stage in Stage::CHAIN {
        run_stage(stage, &config(&stepwise)).unwrap();
    }
    assert_eq!(snapshot(&stepwise), first);
}

#[test]
fn worker_count_does_not_change_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut one = config(&tmp.path().join("one"));
    one.workers = 1;
    let mut many = config(&tmp.path().join("many"));
    many.workers = 8;
    run_stage(Stage::All, &one).unwrap();
    run_stage(Stage::All, &many).unwrap();
    assert_eq!(snapshot(&one.output_dir), snapshot(&many.output_dir));
}

#[test]
fn missing_corpus_is_a_config_error_without_writes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let cfg = RunConfig::minimal(tmp.path().join("absent.jsonl"), &out);
    let err = run_stage(Stage::All, &cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!out.exists());
}

#[test]
fn score_stage_needs_the_diagnostic_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(&tmp.path().join("out"));
    let err = run_stage(Stage::Score, &cfg).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn invalid_parameters_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    for tweak in [
        (|c: &mut RunConfig| c.max_level = 0) as fn(&mut RunConfig),
        |c| c.runs = 0,
        |c| c.workers = 0,
    ] {
        let mut cfg = config(&tmp.path().join("out"));
        tweak(&mut cfg);
        assert_eq!(run_stage(Stage::All, &cfg).unwrap_err().exit_code(), 2);
    }
}

#[test]
fn human_annotations_feed_the_commonsense_section() {
    let tmp = tempfile::tempdir().unwrap();
    let toy = toy_corpus();
    let mut summaries = toy.summaries().to_vec();
    let mut records = Vec::new();
    for doc in toy.documents() {
        let reference = &toy.reference(&doc.id).unwrap().text;
        let words: Vec<&str> = reference.split_whitespace().collect();
        for (k, keep) in [(0u32, words.len()), (1, words.len() / 2), (2, 2)] {
            let id = format!("{}/gen-{k}", doc.id);
            summaries.push(SummaryRecord {
                id: id.clone(),
                doc_id: doc.id.clone(),
                text: words[..keep.min(words.len())].join(" "),
                kind: SummaryKind::Generated,
                annotations: None,
            });
            let mut error_counts = BTreeMap::new();
            if k > 0 {
                error_counts.insert(ErrorType::ExtrinsicEntity, k);
            }
            // "other" errors are excluded by default and must not shift the level
            error_counts.insert(ErrorType::Other, 1);
            records.push(HumanAnnotationRecord {
                summary_id: id,
                doc_id: doc.id.clone(),
                error_counts,
                total_level: k + 1,
                judged_factual: Judgement::No,
            });
        }
    }
    let corpus = Corpus::new("with-generated", toy.documents().to_vec(), summaries).unwrap();
    let corpus_path = tmp.path().join("corpus.jsonl");
    fs::write(&corpus_path, corpus.to_canonical_string()).unwrap();
    let ann_path = tmp.path().join("human.jsonl");
    let mut buf = Vec::new();
    write_human_annotations(&records, &mut buf).unwrap();
    fs::write(&ann_path, buf).unwrap();

    let out = tmp.path().join("out");
    let mut cfg = RunConfig::minimal(&corpus_path, &out);
    cfg.human_annotations = Some(ann_path);
    run_stage(Stage::All, &cfg).unwrap();

    let bundle =
        ReportBundle::from_jsonl(&fs::read_to_string(out.join("report.jsonl")).unwrap()).unwrap();
    assert_eq!(bundle.commonsense.len(), 3 * 3);
    for row in &bundle.commonsense {
        assert_eq!(row.n, if row.domain == "dialogue" { 18 } else { 21 });
        // truncation varies with the level, so the correlation is defined
        assert!(row.r.is_some(), "{row:?}");
    }
    let md = fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.contains("## Correlation with human judgements"));
}
