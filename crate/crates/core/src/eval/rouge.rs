//! ROUGE-N and ROUGE-L over lowercase alphanumeric tokens.
//!
//! Conventions for degenerate inputs: both sides empty scores 1.0, exactly
//! one side empty scores 0.0. ROUGE-L uses sentence-level LCS and F1 with
//! beta = 1.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    const ONE: RougeScore = RougeScore {
        precision: 1.0,
        recall: 1.0,
        f1: 1.0,
    };
    const ZERO: RougeScore = RougeScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    fn from_counts(overlap: usize, pred_total: usize, ref_total: usize) -> Self {
        if pred_total == 0 && ref_total == 0 {
            return RougeScore::ONE;
        }
        if pred_total == 0 || ref_total == 0 {
            return RougeScore::ZERO;
        }
        let precision = overlap as f64 / pred_total as f64;
        let recall = overlap as f64 / ref_total as f64;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        RougeScore {
            precision,
            recall,
            f1,
        }
    }
}

/// Lowercase maximal alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n == 0 || tokens.len() < n {
        return counts;
    }
    for window in tokens.windows(n) {
        *counts.entry(window).or_insert(0) += 1;
    }
    counts
}

/// N-gram multiset overlap: precision over predicted n-grams, recall over
/// reference n-grams.
pub fn rouge_n(pred: &str, reference: &str, n: usize) -> RougeScore {
    let pred_tokens = tokenize(pred);
    let ref_tokens = tokenize(reference);
    let pred_ngrams = ngram_counts(&pred_tokens, n);
    let ref_ngrams = ngram_counts(&ref_tokens, n);
    let pred_total: usize = pred_ngrams.values().sum();
    let ref_total: usize = ref_ngrams.values().sum();
    let overlap: usize = pred_ngrams
        .iter()
        .filter_map(|(ng, c)| ref_ngrams.get(ng).map(|r| (*c).min(*r)))
        .sum();
    RougeScore::from_counts(overlap, pred_total, ref_total)
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Longest-common-subsequence score over token sequences.
pub fn rouge_l(pred: &str, reference: &str) -> RougeScore {
    let pred_tokens = tokenize(pred);
    let ref_tokens = tokenize(reference);
    let lcs = lcs_len(&pred_tokens, &ref_tokens);
    RougeScore::from_counts(lcs, pred_tokens.len(), ref_tokens.len())
}
