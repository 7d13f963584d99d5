//! ROUGE-1, ROUGE-2 and ROUGE-L, reported as full-length precision, recall and F1.
//!
//! N-grams never span a sentence boundary; counts from every sentence on a
//! side are pooled. ROUGE-L runs a single LCS over the concatenated tokens of
//! each side. No stemming or stopword removal is applied.

use std::collections::HashMap;

use serde::Serialize;

use crate::corpus::Sentence;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(matched: usize, candidate_total: usize, reference_total: usize) -> Self {
        let precision = ratio(matched, candidate_total);
        let recall = ratio(matched, reference_total);
        RougeScore::from_pr(precision, recall)
    }

    pub fn from_pr(precision: f64, recall: f64) -> Self {
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

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn ngram_counts(sentences: &[Sentence], n: usize) -> (HashMap<&[String], usize>, usize) {
    let mut counts = HashMap::new();
    let mut total = 0;
    for s in sentences {
        for gram in s.tokens().windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
            total += 1;
        }
    }
    (counts, total)
}

/// ROUGE-N with clipped counts. Panics if `n` is zero.
pub fn rouge_n(candidate: &[Sentence], reference: &[Sentence], n: usize) -> RougeScore {
    assert!(n >= 1, "rouge_n needs n >= 1");
    let (cand, cand_total) = ngram_counts(candidate, n);
    let (refr, ref_total) = ngram_counts(reference, n);
    let matched: usize = cand
        .iter()
        .map(|(gram, &c)| refr.get(gram).map_or(0, |&r| c.min(r)))
        .sum();
    RougeScore::from_counts(matched, cand_total, ref_total)
}

/// Length of the longest common subsequence, O(|a|·|b|) time and O(|b|) space.
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

pub fn rouge_l(candidate: &[Sentence], reference: &[Sentence]) -> RougeScore {
    let cand: Vec<&String> = candidate.iter().flat_map(|s| s.tokens()).collect();
    let refr: Vec<&String> = reference.iter().flat_map(|s| s.tokens()).collect();
    let l = lcs_len(&cand, &refr);
    RougeScore::from_counts(l, cand.len(), refr.len())
}

/// Mean of ROUGE-1 and ROUGE-2 F1; the single objective used for oracle
/// labels, compression-pair alignment and model selection.
pub fn rouge_mean(candidate: &[Sentence], reference: &[Sentence]) -> f64 {
    (rouge_n(candidate, reference, 1).f1 + rouge_n(candidate, reference, 2).f1) / 2.0
}

/// All three metrics for one candidate/reference pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RougeTriple {
    pub rouge_1: RougeScore,
    pub rouge_2: RougeScore,
    pub rouge_l: RougeScore,
}

impl RougeTriple {
    pub fn compute(candidate: &[Sentence], reference: &[Sentence]) -> Self {
        RougeTriple {
            rouge_1: rouge_n(candidate, reference, 1),
            rouge_2: rouge_n(candidate, reference, 2),
            rouge_l: rouge_l(candidate, reference),
        }
    }

    /// Macro average over records; the sum runs in a fixed order after
    /// sorting each field, so the result does not depend on record order.
    pub fn average(items: &[RougeTriple]) -> RougeTriple {
        fn avg(mut xs: Vec<f64>) -> f64 {
            if xs.is_empty() {
                return 0.0;
            }
            xs.sort_by(f64::total_cmp);
            xs.iter().sum::<f64>() / xs.len() as f64
        }
        let field = |f: &dyn Fn(&RougeTriple) -> RougeScore| RougeScore {
            precision: avg(items.iter().map(|t| f(t).precision).collect()),
            recall: avg(items.iter().map(|t| f(t).recall).collect()),
            f1: avg(items.iter().map(|t| f(t).f1).collect()),
        };
        RougeTriple {
            rouge_1: field(&|t| t.rouge_1),
            rouge_2: field(&|t| t.rouge_2),
            rouge_l: field(&|t| t.rouge_l),
        }
    }
}
