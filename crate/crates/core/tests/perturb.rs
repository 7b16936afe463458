use std::collections::BTreeMap;
use std::sync::OnceLock;

use factgauge::corpus::{toy_corpus, Corpus, Domain};
use factgauge::perturb::{
    diagnostic_stats, generate_diagnostic, parse_diagnostic, replay, ErrorType, Subset,
};
use factgauge::taggers::{annotate, LexiconSet};
use proptest::prelude::*;

fn setup() -> &'static (Corpus, LexiconSet) {
    static CELL: OnceLock<(Corpus, LexiconSet)> = OnceLock::new();
    CELL.get_or_init(|| {
        let lex = LexiconSet::bundled();
        let corpus = toy_corpus().annotate_missing(|t| annotate(t, &lex).unwrap());
        (corpus, lex)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn instances_replay_and_respect_their_subset(seed in any::<u64>(), max_level in 1u32..6) {
        let (corpus, lex) = setup();
        let dataset = generate_diagnostic(corpus, max_level, 2, seed, lex, 2).unwrap();
        prop_assert_eq!(dataset.len(), corpus.len() * max_level as usize * 2 * 2);
        for inst in &dataset.instances {
            let reference = &corpus.reference(&inst.doc_id).unwrap().text;
            prop_assert!(inst.applied.len() <= inst.level as usize);
            prop_assert_eq!(&replay(reference, &inst.applied).unwrap(), &inst.text);
            prop_assert_eq!(inst.applied.is_empty(), &inst.text == reference);
            let allowed = inst.subset.error_types();
            prop_assert!(inst.applied.iter().all(|e| allowed.contains(&e.error_type)));
        }
    }
}

#[test]
fn generation_is_seed_and_worker_deterministic() {
    let (corpus, lex) = setup();
    let a = generate_diagnostic(corpus, 3, 3, 42, lex, 1).unwrap();
    let b = generate_diagnostic(corpus, 3, 3, 42, lex, 6).unwrap();
    let c = generate_diagnostic(corpus, 3, 3, 43, lex, 1).unwrap();
    assert_eq!(a.to_canonical_string(), b.to_canonical_string());
    assert_ne!(a.to_canonical_string(), c.to_canonical_string());
    assert_eq!(a.header.corpus_checksum, corpus.checksum());
}

#[test]
fn dataset_file_round_trips() {
    let (corpus, lex) = setup();
    let dataset = generate_diagnostic(corpus, 2, 2, 9, lex, 2).unwrap();
    let text = dataset.to_canonical_string();
    let back = parse_diagnostic(&text).unwrap();
    assert_eq!(back, dataset);
    assert!(parse_diagnostic(&text.replacen("factgauge.diagnostic/v1", "other/v9", 1)).is_err());
}

#[test]
fn every_injectable_error_type_occurs() {
    let (corpus, lex) = setup();
    let dataset = generate_diagnostic(corpus, 3, 5, 1, lex, 2).unwrap();
    let mut seen: BTreeMap<ErrorType, usize> = BTreeMap::new();
    for e in dataset.instances.iter().flat_map(|i| &i.applied) {
        *seen.entry(e.error_type).or_default() += 1;
    }
    for t in ErrorType::INJECTABLE {
        assert!(
            seen.get(&t).copied().unwrap_or(0) > 0,
            "{t:?} never applied"
        );
    }
}

#[test]
fn diagnostic_stats_match_flat_count() {
    let (corpus, lex) = setup();
    let dataset = generate_diagnostic(corpus, 3, 4, 21, lex, 2).unwrap();
    let table = diagnostic_stats(&dataset).unwrap();
    for domain in [Domain::ShortNews, Domain::LongNews, Domain::Dialogue] {
        for subset in Subset::ALL {
            let row = table.row(domain, subset).unwrap();
            assert_eq!(row.levels.len(), 3);
            let mut pct_sum = 0.0;
            for stat in &row.levels {
                let cell: Vec<_> = dataset
                    .instances
                    .iter()
                    .filter(|i| i.domain == domain && i.subset == subset && i.level == stat.level)
                    .collect();
                let n = cell.len() as f64;
                let mean = cell.iter().map(|i| i.applied.len() as f64).sum::<f64>() / n;
                let pct = 100.0 * cell.iter().filter(|i| !i.applied.is_empty()).count() as f64 / n;
                assert!((stat.mean_applied - mean).abs() < 1e-9);
                assert!((stat.pct_transformed - pct).abs() < 1e-9);
                pct_sum += pct;
            }
            assert!((row.overall_pct - pct_sum / 3.0).abs() < 1e-9);
        }
    }
}
