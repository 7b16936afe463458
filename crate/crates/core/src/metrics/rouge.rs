//! ROUGE-1/2/L against the source document.
//!
//! Tokenization: lowercase, then maximal runs of alphanumeric characters;
//! everything else separates tokens and is dropped. No stemming, no stopword
//! removal. External adapters that want to match these numbers must use the
//! same rule.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when either side has too few tokens to form a single n-gram.
    pub degenerate: bool,
}

impl RougeScore {
    fn degenerate() -> Self {
        Self {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
            degenerate: true,
        }
    }

    fn from_counts(overlap: usize, candidate: usize, source: usize) -> Self {
        let precision = overlap as f64 / candidate as f64;
        let recall = overlap as f64 / source as f64;
        let f1 = if overlap == 0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            degenerate: false,
        }
    }
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Clipped n-gram overlap for `n` ∈ {1, 2}. Returns `None` for other `n`.
pub fn rouge_n(n: usize, source: &str, candidate: &str) -> Option<RougeScore> {
    if !(1..=2).contains(&n) {
        return None;
    }
    let src = tokenize(source);
    let cand = tokenize(candidate);
    if src.len() < n || cand.len() < n {
        return Some(RougeScore::degenerate());
    }
    let src_counts = ngram_counts(&src, n);
    let cand_counts = ngram_counts(&cand, n);
    let overlap = cand_counts
        .iter()
        .map(|(g, &c)| c.min(src_counts.get(g).copied().unwrap_or(0)))
        .sum();
    Some(RougeScore::from_counts(
        overlap,
        cand.len() + 1 - n,
        src.len() + 1 - n,
    ))
}

/// Longest-common-subsequence overlap over tokens.
pub fn rouge_l(source: &str, candidate: &str) -> RougeScore {
    let src = tokenize(source);
    let cand = tokenize(candidate);
    if src.is_empty() || cand.is_empty() {
        return RougeScore::degenerate();
    }
    RougeScore::from_counts(lcs_len(&src, &cand), cand.len(), src.len())
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}
