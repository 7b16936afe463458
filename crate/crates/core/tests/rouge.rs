use factgauge::metrics::{rouge_l, rouge_n};
use proptest::prelude::*;

const VOCAB: &[&str] = &[
    "the", "cat", "sat", "on", "mat", "Dog", "dog,", "ran", "42", "Café",
];

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(VOCAB), 0..12).prop_map(|w| w.join(" "))
}

fn words(s: &str) -> Vec<String> {
    s.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

// exhaustive LCS, fine for the short inputs generated here
fn naive_lcs(a: &[String], b: &[String]) -> usize {
    match (a.split_first(), b.split_first()) {
        (Some((x, ra)), Some((y, rb))) if x == y => 1 + naive_lcs(ra, rb),
        (Some((_, ra)), Some((_, rb))) => naive_lcs(ra, b).max(naive_lcs(a, rb)),
        _ => 0,
    }
}

proptest! {
    #[test]
    fn scores_are_bounded_and_symmetric(a in text(), b in text()) {
        for (ab, ba) in [
            (rouge_n(1, &a, &b).unwrap(), rouge_n(1, &b, &a).unwrap()),
            (rouge_n(2, &a, &b).unwrap(), rouge_n(2, &b, &a).unwrap()),
            (rouge_l(&a, &b), rouge_l(&b, &a)),
        ] {
            for v in [ab.precision, ab.recall, ab.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((ab.f1 - ba.f1).abs() < 1e-12);
            prop_assert_eq!(ab.precision, ba.recall);
        }
    }

    #[test]
    fn identical_texts_score_one(a in text()) {
        let n = words(&a).len();
        prop_assume!(n >= 2);
        prop_assert_eq!(rouge_n(1, &a, &a).unwrap().f1, 1.0);
        prop_assert_eq!(rouge_n(2, &a, &a).unwrap().f1, 1.0);
        prop_assert_eq!(rouge_l(&a, &a).f1, 1.0);
    }

    #[test]
    fn rouge_l_uses_longest_common_subsequence(a in text(), b in text()) {
        let (wa, wb) = (words(&a), words(&b));
        prop_assume!(!wa.is_empty() && !wb.is_empty());
        let lcs = naive_lcs(&wa, &wb) as f64;
        let got = rouge_l(&a, &b);
        prop_assert!((got.precision - lcs / wb.len() as f64).abs() < 1e-12);
        prop_assert!((got.recall - lcs / wa.len() as f64).abs() < 1e-12);
    }
}

#[test]
fn hand_computed_case() {
    let src = "The cat sat on the mat.";
    let cand = "the cat sat";
    assert!((rouge_n(1, src, cand).unwrap().f1 - 2.0 / 3.0).abs() < 1e-12);
    assert!((rouge_n(2, src, cand).unwrap().f1 - 4.0 / 7.0).abs() < 1e-12);
    assert!((rouge_l(src, cand).f1 - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn clipping_and_degenerate_inputs() {
    let s = rouge_n(1, "a b", "a a a a").unwrap();
    assert_eq!(s.precision, 0.25);
    assert_eq!(s.recall, 0.5);
    let d = rouge_n(2, "single", "single").unwrap();
    assert!(d.degenerate && d.f1 == 0.0);
    assert!(rouge_l("", "x").degenerate);
    assert!(rouge_n(3, "a b c", "a b c").is_none());
}
