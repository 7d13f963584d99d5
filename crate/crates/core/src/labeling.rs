//! Supervised targets derived from document/summary pairs: greedy oracle
//! sentence labels and sentence-level pairs for the compression model.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Sentence, SummarySet};
use crate::error::{Error, Result};
use crate::io;
use crate::rouge::rouge_mean;

/// One binary label per document sentence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSequence(pub Vec<u8>);

impl LabelSequence {
    pub fn zeros(len: usize) -> Self {
        LabelSequence(vec![0; len])
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        LabelSequence(bits.into_iter().map(u8::from).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> usize {
        self.0[i] as usize
    }

    pub fn ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    /// Indices of the 1-labelled sentences, ascending.
    pub fn selected(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Greedily grows the sentence set whose ROUGE mean against the summary is
/// highest, stopping when no sentence strictly improves it or `max_select`
/// sentences are chosen.
pub fn oracle_labels(doc: &Document, summary: &SummarySet, max_select: usize) -> LabelSequence {
    let n = doc.sentences.len();
    let mut chosen = vec![false; n];
    let mut best_score = 0.0;
    for _ in 0..max_select.min(n) {
        let mut step_best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| !chosen[i]) {
            let candidate: Vec<Sentence> = (0..n)
                .filter(|&j| chosen[j] || j == i)
                .map(|j| doc.sentences[j].clone())
                .collect();
            let score = rouge_mean(&candidate, &summary.sentences);
            if step_best.is_none_or(|(_, s)| score > s) {
                step_best = Some((i, score));
            }
        }
        match step_best {
            Some((i, score)) if score > best_score => {
                chosen[i] = true;
                best_score = score;
            }
            _ => break,
        }
    }
    LabelSequence::from_bools(chosen)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompressionPair {
    pub source: Sentence,
    pub target: Sentence,
    pub doc_id: String,
}

/// Aligns each summary sentence with its most similar document sentence.
pub fn compression_pairs(doc: &Document, summary: &SummarySet) -> Vec<CompressionPair> {
    summary
        .sentences
        .iter()
        .map(|target| {
            let mut best = (0, f64::NEG_INFINITY);
            for (j, s) in doc.sentences.iter().enumerate() {
                let score = rouge_mean(std::slice::from_ref(s), std::slice::from_ref(target));
                if score > best.1 {
                    best = (j, score);
                }
            }
            CompressionPair {
                source: doc.sentences[best.0].clone(),
                target: target.clone(),
                doc_id: doc.id.clone(),
            }
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LabelRow {
    pub id: String,
    pub labels: Vec<u8>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PairRow {
    pub doc_id: String,
    pub source: Vec<String>,
    pub target: Vec<String>,
}

pub fn write_labels(path: &Path, rows: &[(String, LabelSequence)]) -> Result<()> {
    let rows: Vec<LabelRow> = rows
        .iter()
        .map(|(id, l)| LabelRow {
            id: id.clone(),
            labels: l.0.clone(),
        })
        .collect();
    io::write_jsonl(path, &rows)
}

pub fn read_labels(path: &Path) -> Result<Vec<(String, LabelSequence)>> {
    io::read_jsonl::<LabelRow>(path)?
        .into_iter()
        .map(|(line, row)| {
            if row.labels.iter().any(|&b| b > 1) {
                return Err(Error::MalformedLine {
                    line,
                    message: format!("labels for {:?} must be 0 or 1", row.id),
                });
            }
            Ok((row.id, LabelSequence(row.labels)))
        })
        .collect()
}

pub fn write_pairs(path: &Path, pairs: &[CompressionPair]) -> Result<()> {
    let rows: Vec<PairRow> = pairs
        .iter()
        .map(|p| PairRow {
            doc_id: p.doc_id.clone(),
            source: p.source.tokens().to_vec(),
            target: p.target.tokens().to_vec(),
        })
        .collect();
    io::write_jsonl(path, &rows)
}

pub fn read_pairs(path: &Path) -> Result<Vec<CompressionPair>> {
    io::read_jsonl::<PairRow>(path)?
        .into_iter()
        .map(|(line, row)| {
            let bad = |side: &str| Error::MalformedLine {
                line,
                message: format!("pair from {:?} has an empty {side}", row.doc_id),
            };
            Ok(CompressionPair {
                source: Sentence::new(row.source.clone()).map_err(|_| bad("source"))?,
                target: Sentence::new(row.target.clone()).map_err(|_| bad("target"))?,
                doc_id: row.doc_id,
            })
        })
        .collect()
}
