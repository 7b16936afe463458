use std::collections::{BTreeMap, BTreeSet, HashMap};

use factgauge::corpus::{toy_corpus, Corpus, HumanAnnotationRecord, Judgement};
use factgauge::metastats::{
    adjacent_level_test, commonsense_correlation, lower_bound_pairs, p_value_pearson, pearson,
    run_meta, sensitivity, CorrelationMode, LevelSeries, MetaOptions, MetaResults, SeriesSubset,
};
use factgauge::metrics::{
    build_items, score_dataset, ItemKind, MetricError, Outcome, ScoreItem, ScoreTable, Scorer,
};
use factgauge::perturb::{generate_diagnostic, DiagnosticDataset, ErrorType, Subset};
use factgauge::taggers::{annotate, LexiconSet};
use proptest::prelude::*;
use statrs::function::beta::beta_reg;

fn series(means: &[f64]) -> LevelSeries {
    LevelSeries::from_means("m", "short-news", SeriesSubset::Entity, means, 1.0, 0.0)
}

fn covariance_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (n - 1.0);
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    cov / (sx * sy)
}

fn welch_textbook(a: &[f64], b: &[f64]) -> (f64, f64, f64) {
    let var = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (
            m,
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0),
        )
    };
    let ((ma, va), (mb, vb)) = (var(a), var(b));
    let (qa, qb) = (va / a.len() as f64, vb / b.len() as f64);
    let t = (ma - mb) / (qa + qb).sqrt();
    let df = (qa + qb).powi(2)
        / (qa.powi(2) / (a.len() as f64 - 1.0) + qb.powi(2) / (b.len() as f64 - 1.0));
    (t, df, beta_reg(df / 2.0, 0.5, df / (df + t * t)))
}

fn well_spread(v: &[f64]) -> bool {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() > 1e-3
}

proptest! {
    #[test]
    fn sensitivity_ignores_shifts_and_scales_linearly(
        means in prop::collection::vec(-50.0..50.0f64, 2..8),
        shift in -100.0..100.0f64,
        scale in 0.01..100.0f64,
    ) {
        let s = sensitivity(&series(&means), false).unwrap();
        let shifted: Vec<f64> = means.iter().map(|m| m + shift).collect();
        let scaled: Vec<f64> = means.iter().map(|m| m * scale).collect();
        let tol = 1e-9 * (1.0 + s * scale + shift.abs());
        prop_assert!((sensitivity(&series(&shifted), false).unwrap() - s).abs() <= tol);
        prop_assert!((sensitivity(&series(&scaled), false).unwrap() - s * scale).abs() <= tol);
    }

    #[test]
    fn pearson_is_affine_invariant_and_antisymmetric(
        pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..40),
        a in 0.1..10.0f64,
        b in -10.0..10.0f64,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        prop_assume!(well_spread(&x) && well_spread(&y));
        let r = pearson(&x, &y).unwrap();
        let moved: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let negated: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!((pearson(&moved, &y).unwrap() - r).abs() < 1e-9);
        prop_assert!((pearson(&negated, &y).unwrap() + r).abs() < 1e-12);
        prop_assert!((covariance_pearson(&x, &y) - r).abs() < 1e-12);
    }

    #[test]
    fn p_value_decreases_with_correlation_strength(
        r1 in 0.0..0.999f64,
        r2 in 0.0..0.999f64,
        n in 3usize..200,
    ) {
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        let p_lo = p_value_pearson(lo, n).unwrap();
        let p_hi = p_value_pearson(-hi, n).unwrap();
        prop_assert!(p_hi <= p_lo + 1e-15);
        prop_assert!((0.0..=1.0).contains(&p_lo));
    }

    #[test]
    fn welch_matches_textbook(
        a in prop::collection::vec(-5.0..5.0f64, 2..30),
        b in prop::collection::vec(-5.0..5.0f64, 2..30),
    ) {
        prop_assume!(well_spread(&a) && well_spread(&b));
        let got = adjacent_level_test(&a, &b).unwrap();
        let (t, df, p) = welch_textbook(&a, &b);
        prop_assert!((got.t - t).abs() < 1e-9 * (1.0 + t.abs()));
        prop_assert!((got.df - df).abs() < 1e-9 * (1.0 + df));
        prop_assert!((got.p - p).abs() < 1e-9);
        prop_assert!(!got.degenerate);
    }
}

#[test]
fn planted_commonsense_correlation_is_recovered() {
    let n = 100;
    let x: Vec<f64> = (0..n).map(|i| (i % 5) as f64).collect();
    let noise: Vec<f64> = (0..n)
        .map(|i| ((i * 37 % 101) as f64 / 101.0) - 0.5)
        .collect();
    // standardize x, orthogonalize the noise against it, then mix
    let standardize = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let s = v.iter().map(|a| (a - m).powi(2)).sum::<f64>().sqrt();
        v.iter().map(|a| (a - m) / s).collect::<Vec<f64>>()
    };
    let zx = standardize(&x);
    let zn = standardize(&noise);
    let proj: f64 = zx.iter().zip(&zn).map(|(a, b)| a * b).sum();
    let e = standardize(
        &zn.iter()
            .zip(&zx)
            .map(|(b, a)| b - proj * a)
            .collect::<Vec<_>>(),
    );
    let target = -0.22f64;
    let y: Vec<f64> = zx
        .iter()
        .zip(&e)
        .map(|(a, b)| 0.5 + target * a + (1.0 - target * target).sqrt() * b)
        .collect();

    let records: Vec<HumanAnnotationRecord> = x
        .iter()
        .enumerate()
        .map(|(i, &level)| HumanAnnotationRecord {
            summary_id: format!("gen-{i}"),
            doc_id: "d".into(),
            error_counts: BTreeMap::from([(ErrorType::IntrinsicEntity, level as u32)]),
            total_level: level as u32,
            judged_factual: if level == 0.0 {
                Judgement::Yes
            } else {
                Judgement::No
            },
        })
        .collect();
    let mut table =
        ScoreTable::new(records.iter().map(|r| r.summary_id.clone()).collect()).unwrap();
    table
        .add_metric("m", y.iter().map(|&v| Ok(v)).collect())
        .unwrap();
    let refs: Vec<&HumanAnnotationRecord> = records.iter().collect();
    let c = commonsense_correlation(&table, "m", &refs, &BTreeSet::new()).unwrap();
    assert_eq!(c.n, n);
    let r = c.r.unwrap();
    assert!((r - target).abs() < 1e-9, "{r}");
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    assert!((c.p.unwrap() - beta_reg(df / 2.0, 0.5, df / (df + t * t))).abs() < 1e-9);
    assert!(c.p.unwrap() < 0.05);

    // only intrinsic errors were planted, so excluding them leaves no variance
    let all: BTreeSet<ErrorType> = [ErrorType::IntrinsicEntity].into_iter().collect();
    assert!(commonsense_correlation(&table, "m", &refs, &all).is_err());
}

/// Scores that fall 0.1 per applied error, optionally only on one subset.
struct Planted {
    name: &'static str,
    applied: HashMap<String, (usize, Subset)>,
    only: Option<Subset>,
}

impl Scorer for Planted {
    fn name(&self) -> &str {
        self.name
    }

    fn score_items(&self, items: &[ScoreItem], _: usize) -> Result<Vec<Outcome>, MetricError> {
        Ok(items
            .iter()
            .map(|it| {
                Ok(match it.kind {
                    ItemKind::Reference => 1.0,
                    ItemKind::Random => 0.0,
                    _ => match self.applied[&it.id] {
                        (_, s) if self.only.is_some_and(|o| o != s) => 0.9,
                        (k, _) => 1.0 - 0.1 * k as f64,
                    },
                })
            })
            .collect())
    }
}

fn planted_run() -> (MetaResults, Corpus, DiagnosticDataset) {
    let lex = LexiconSet::bundled();
    let corpus = toy_corpus().annotate_missing(|t| annotate(t, &lex).unwrap());
    let dataset = generate_diagnostic(&corpus, 3, 5, 5, &lex, 2).unwrap();
    let items = build_items(
        &corpus,
        Some(&dataset),
        &lower_bound_pairs(&corpus, 5).unwrap(),
    )
    .unwrap();
    let applied: HashMap<String, (usize, Subset)> = dataset
        .instances
        .iter()
        .map(|i| (i.id.clone(), (i.applied.len(), i.subset)))
        .collect();
    let all = Planted {
        name: "all",
        applied: applied.clone(),
        only: None,
    };
    let entity = Planted {
        name: "entity-only",
        applied,
        only: Some(Subset::Entity),
    };
    let scores = score_dataset(&[&all, &entity], &items, 2).unwrap();
    let options = MetaOptions {
        include_level_zero: false,
        correlation_mode: CorrelationMode::PerSummary,
    };
    let metrics = ["all".to_string(), "entity-only".to_string()];
    let meta = run_meta(
        &scores,
        &dataset,
        &corpus,
        &metrics,
        None,
        &BTreeSet::new(),
        options,
    )
    .unwrap();
    (meta, corpus, dataset)
}

#[test]
fn generality_and_robustness_verdicts() {
    let (meta, _, _) = planted_run();
    let general = meta.generality.iter().find(|g| g.metric == "all").unwrap();
    assert!(general.general);
    assert_eq!(general.domains.len(), 3);
    assert!(general.domains.values().all(|&v| v));
    for row in meta.robustness.iter().filter(|r| r.metric == "all") {
        assert!(row.robust, "{row:?}");
    }

    for row in meta.robustness.iter().filter(|r| r.metric == "entity-only") {
        assert!(!row.robust);
        assert!(row.subsets[&SeriesSubset::Entity]);
        assert!(!row.subsets[&SeriesSubset::NonEntity]);
    }
    assert!(
        !meta
            .generality
            .iter()
            .find(|g| g.metric == "entity-only")
            .unwrap()
            .general
    );
}

#[test]
fn meta_results_round_trip_through_json() {
    let (meta, _, _) = planted_run();
    let text = serde_json::to_string(&meta).unwrap();
    let back: MetaResults = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
}

#[test]
fn level_means_average_runs_first() {
    let (meta, corpus, dataset) = planted_run();
    let report = meta
        .reports
        .iter()
        .find(|r| r.metric == "all" && r.domain == "dialogue" && r.subset == SeriesSubset::Entity)
        .unwrap();
    let dialogue: BTreeSet<&str> = corpus
        .documents()
        .iter()
        .filter(|d| d.domain.as_str() == "dialogue")
        .map(|d| d.id.as_str())
        .collect();
    for level in 1..=3u32 {
        let mut per_run: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for i in dataset.instances.iter().filter(|i| {
            i.level == level && i.subset == Subset::Entity && dialogue.contains(i.doc_id.as_str())
        }) {
            per_run
                .entry(i.run)
                .or_default()
                .push(1.0 - 0.1 * i.applied.len() as f64);
        }
        let run_means: Vec<f64> = per_run
            .values()
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
            .collect();
        let expected = run_means.iter().sum::<f64>() / run_means.len() as f64;
        assert!((report.series.mean_at(level).unwrap() - expected).abs() < 1e-12);
    }
    assert_eq!(report.series.upper_bound, 1.0);
    assert_eq!(report.series.lower_bound, 0.0);
}
