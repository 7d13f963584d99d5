//! Documents, summaries, tokenization and vocabulary.
//!
//! A corpus file is JSON Lines; every line holds one document/summary pair with
//! sentences already split:
//!
//! ```text
//! {"id":"d1","document":["The cat sat."],"summary":["Cat sat."]}
//! ```

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io;

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const BOS: usize = 2;
pub const EOS: usize = 3;
pub const SPECIAL_TOKENS: [&str; 4] = ["<pad>", "<unk>", "<bos>", "<eos>"];

const SPLIT_PUNCT: [char; 6] = ['.', ',', '!', '?', ';', ':'];

/// A non-empty token sequence, optionally carrying vocabulary ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sentence {
    tokens: Vec<String>,
    ids: Option<Vec<usize>>,
}

impl Sentence {
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Result<Self> {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() || tokens.iter().any(|t| t.is_empty()) {
            return Err(Error::BlankText);
        }
        Ok(Sentence { tokens, ids: None })
    }

    /// Builds a sentence from whitespace-separated, already-normalized tokens.
    /// Mostly a convenience for tests and examples.
    pub fn from_words(text: &str) -> Result<Self> {
        Sentence::new(text.split_whitespace())
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn ids(&self) -> Option<&[usize]> {
        self.ids.as_deref()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn with_ids(mut self, vocab: &Vocabulary) -> Self {
        self.ids = Some(vocab.encode(&self.tokens));
        self
    }

    pub(crate) fn ids_or_err(&self) -> Result<&[usize]> {
        self.ids
            .as_deref()
            .ok_or_else(|| Error::Data(format!("sentence {:?} has no vocabulary ids", self.text())))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub id: String,
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummarySet {
    pub sentences: Vec<Sentence>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub document: Document,
    pub summary: SummarySet,
}

impl Record {
    pub fn id(&self) -> &str {
        &self.document.id
    }

    /// Attaches vocabulary ids to every sentence on both sides.
    pub fn encoded(&self, vocab: &Vocabulary) -> Record {
        let enc = |ss: &[Sentence]| ss.iter().map(|s| s.clone().with_ids(vocab)).collect();
        Record {
            document: Document {
                id: self.document.id.clone(),
                sentences: enc(&self.document.sentences),
            },
            summary: SummarySet {
                sentences: enc(&self.summary.sentences),
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub split: Split,
    pub records: Vec<Record>,
}

impl Corpus {
    pub fn encoded(&self, vocab: &Vocabulary) -> Corpus {
        Corpus {
            split: self.split,
            records: self.records.iter().map(|r| r.encoded(vocab)).collect(),
        }
    }
}

/// On-disk corpus line.
#[derive(Debug, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub document: Vec<String>,
    pub summary: Vec<String>,
}

/// Lowercases, splits on whitespace and peels trailing `. , ! ? ; :` off each
/// word as standalone tokens.
pub fn tokenize(raw: &str) -> Result<Sentence> {
    let lowered = raw.trim().to_lowercase();
    if lowered.is_empty() {
        return Err(Error::BlankText);
    }
    let mut tokens = Vec::new();
    for word in lowered.split_whitespace() {
        let core = word.trim_end_matches(SPLIT_PUNCT);
        if !core.is_empty() {
            tokens.push(core.to_string());
        }
        tokens.extend(word[core.len()..].chars().map(String::from));
    }
    Sentence::new(tokens)
}

fn tokenize_all(lines: &[String], line: usize, id: &str) -> Result<Vec<Sentence>> {
    lines
        .iter()
        .map(|s| {
            tokenize(s).map_err(|_| Error::MalformedLine {
                line,
                message: format!("record {id:?} contains a blank sentence"),
            })
        })
        .collect()
}

pub fn load_corpus(path: &Path, split: Split) -> Result<Corpus> {
    let rows: Vec<(usize, RawRecord)> = io::read_jsonl(path)?;
    let mut records = Vec::with_capacity(rows.len());
    let mut seen = std::collections::HashSet::new();
    for (line, raw) in rows {
        if raw.id.is_empty() {
            return Err(Error::MalformedLine {
                line,
                message: "empty id".into(),
            });
        }
        if raw.document.is_empty() {
            return Err(Error::EmptyRecord {
                line,
                id: raw.id,
                field: "document",
            });
        }
        if raw.summary.is_empty() {
            return Err(Error::EmptyRecord {
                line,
                id: raw.id,
                field: "summary",
            });
        }
        if !seen.insert(raw.id.clone()) {
            return Err(Error::MalformedLine {
                line,
                message: format!("duplicate id {:?}", raw.id),
            });
        }
        let document = tokenize_all(&raw.document, line, &raw.id)?;
        let summary = tokenize_all(&raw.summary, line, &raw.id)?;
        records.push(Record {
            document: Document {
                id: raw.id,
                sentences: document,
            },
            summary: SummarySet { sentences: summary },
        });
    }
    Ok(Corpus { split, records })
}

pub fn write_corpus(path: &Path, records: &[RawRecord]) -> Result<()> {
    io::write_jsonl(path, records)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
    counts: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    specials: Vec<String>,
    tokens: Vec<(String, usize)>,
}

impl Vocabulary {
    fn from_entries(entries: Vec<(String, usize)>) -> Result<Self> {
        let mut id_to_token: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut counts = vec![0; SPECIAL_TOKENS.len()];
        for (tok, count) in entries {
            id_to_token.push(tok);
            counts.push(count);
        }
        let mut token_to_id = HashMap::with_capacity(id_to_token.len());
        for (i, tok) in id_to_token.iter().enumerate() {
            if token_to_id.insert(tok.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary token {tok:?}")));
            }
        }
        Ok(Vocabulary {
            token_to_id,
            id_to_token,
            counts,
        })
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn count(&self, id: usize) -> usize {
        self.counts.get(id).copied().unwrap_or(0)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(SPECIAL_TOKENS[UNK]).to_string())
            .collect()
    }

    pub fn to_json(&self) -> String {
        let file = VocabFile {
            specials: SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect(),
            tokens: self.id_to_token[SPECIAL_TOKENS.len()..]
                .iter()
                .cloned()
                .zip(self.counts[SPECIAL_TOKENS.len()..].iter().copied())
                .collect(),
        };
        serde_json::to_string(&file).expect("vocabulary serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: VocabFile =
            serde_json::from_str(text).map_err(|e| Error::Data(format!("vocabulary: {e}")))?;
        if file.specials != SPECIAL_TOKENS {
            return Err(Error::Data(format!(
                "vocabulary specials {:?} differ from {:?}",
                file.specials, SPECIAL_TOKENS
            )));
        }
        Vocabulary::from_entries(file.tokens)
    }

    /// Hex SHA-256 of the canonical JSON form; checkpoints pin this.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::atomic_write(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Vocabulary::from_json(&text)
    }
}

/// Counts every token on both sides of the records and keeps those seen at
/// least `min_count` times, most frequent first, ties in lexicographic order.
pub fn build_vocab(records: &[Record], min_count: usize) -> Result<Vocabulary> {
    if records.is_empty() {
        return Err(Error::Data("cannot build a vocabulary from an empty corpus".into()));
    }
    let min_count = min_count.max(1);
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for r in records {
        for s in r.document.sentences.iter().chain(&r.summary.sentences) {
            for t in s.tokens() {
                *freq.entry(t.as_str()).or_default() += 1;
            }
        }
    }
    let mut entries: Vec<(String, usize)> = freq
        .into_iter()
        .filter(|&(t, c)| c >= min_count && !SPECIAL_TOKENS.contains(&t))
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Vocabulary::from_entries(entries)
}
