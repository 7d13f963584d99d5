//! Pipeline driver behind the `latsum` binary.
//!
//! Every stage reads its inputs from files, writes its outputs atomically, and
//! is a deterministic function of (inputs, config, seed).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::compression::{self, CompressionConfig, CompressionModel};
use crate::corpus::{build_vocab, load_corpus, write_corpus, Corpus, Record, Sentence, Split, Vocabulary};
use crate::error::{Error, Result};
use crate::extractive::{self, summary_sentences, ExtractiveConfig, ExtractiveModel, TrainConfig};
use crate::io::{atomic_write, read_jsonl, write_jsonl};
use crate::labeling::{self, compression_pairs, oracle_labels, read_labels, read_pairs, LabelSequence};
use crate::latent::{self, LatentConfig};
use crate::numerics::{load_checkpoint, save_checkpoint, seeded_rng, AdamConfig};
use crate::rouge::{rouge_mean, RougeScore, RougeTriple};

/// Flat run configuration. A JSON file supplies any subset of the keys;
/// command-line flags override the file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub hidden: usize,
    pub extractive_lr: f64,
    pub compression_lr: f64,
    pub latent_lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub clip: f64,
    pub dropout: f64,
    pub word_dropout: f64,
    pub alpha: f64,
    pub extractive_epochs: usize,
    pub compression_epochs: usize,
    pub latent_epochs: usize,
    pub batch_size: usize,
    pub max_select: usize,
    pub min_count: usize,
    pub k: usize,
    pub latent_samples: usize,
    pub normalized_score: bool,
    pub policy_dropout: bool,
    pub max_compress_len: usize,
    pub corpus: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub vocab: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub pairs: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub scorer: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub log: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            hidden: 300,
            extractive_lr: 0.001,
            compression_lr: 0.001,
            latent_lr: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            clip: 5.0,
            dropout: 0.3,
            word_dropout: 0.2,
            alpha: 0.5,
            extractive_epochs: 10,
            compression_epochs: 10,
            latent_epochs: 5,
            batch_size: 32,
            max_select: 3,
            min_count: 2,
            k: 3,
            latent_samples: 1,
            normalized_score: true,
            policy_dropout: true,
            max_compress_len: 30,
            corpus: None,
            valid: None,
            vocab: None,
            labels: None,
            pairs: None,
            checkpoint: None,
            scorer: None,
            out: None,
            log: None,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.hidden > 0, "hidden must be positive"),
            (self.batch_size > 0, "batch_size must be positive"),
            (self.k > 0, "k must be positive"),
            (self.latent_samples > 0, "latent_samples must be positive"),
            ((0.0..=1.0).contains(&self.alpha), "alpha must lie in [0, 1]"),
            ((0.0..1.0).contains(&self.dropout), "dropout must lie in [0, 1)"),
            ((0.0..1.0).contains(&self.word_dropout), "word_dropout must lie in [0, 1)"),
            (self.clip > 0.0, "clip must be positive"),
            (self.min_count > 0, "min_count must be positive"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(msg.into()));
            }
        }
        Ok(())
    }

    fn need<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        field
            .as_deref()
            .ok_or_else(|| Error::Config(format!("missing required path `{name}` (set it in the config or pass --{name})")))
    }

    fn train_config(&self, lr: f64, epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: self.batch_size,
            adam: AdamConfig {
                lr,
                beta1: self.beta1,
                beta2: self.beta2,
                ..AdamConfig::default()
            },
            clip: self.clip,
            top_k: self.k,
            seed: self.seed,
        }
    }

    pub fn latent_config(&self) -> LatentConfig {
        LatentConfig {
            epochs: self.latent_epochs,
            lr: self.latent_lr,
            alpha: self.alpha,
            clip: self.clip,
            samples: self.latent_samples,
            policy_dropout: self.policy_dropout,
            normalized: self.normalized_score,
            seed: self.seed,
        }
    }
}

/// One line of a summary file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub id: String,
    pub summary: Vec<String>,
}

fn load_vocab(cfg: &RunConfig) -> Result<Vocabulary> {
    Vocabulary::load(cfg.need(&cfg.vocab, "vocab")?)
}

fn load_split(path: &Path, split: Split, vocab: Option<&Vocabulary>) -> Result<Corpus> {
    let c = load_corpus(path, split)?;
    Ok(match vocab {
        Some(v) => c.encoded(v),
        None => c,
    })
}

fn write_metrics<T: Serialize>(cfg: &RunConfig, rows: &[T]) -> Result<()> {
    match &cfg.log {
        Some(p) => write_jsonl(p, rows),
        None => Ok(()),
    }
}

fn labels_for(records: &[Record], rows: Vec<(String, LabelSequence)>) -> Result<Vec<LabelSequence>> {
    let mut by_id: BTreeMap<String, LabelSequence> = rows.into_iter().collect();
    records
        .iter()
        .map(|r| {
            let l = by_id
                .remove(r.id())
                .ok_or_else(|| Error::Data(format!("no labels for document {:?}", r.id())))?;
            if l.len() != r.document.len() {
                return Err(Error::Data(format!(
                    "labels for {:?} have length {} but the document has {} sentences",
                    r.id(),
                    l.len(),
                    r.document.len()
                )));
            }
            Ok(l)
        })
        .collect()
}

pub fn load_extractive(path: &Path, vocab: &Vocabulary) -> Result<ExtractiveModel> {
    ExtractiveModel::from_checkpoint(load_checkpoint(path, extractive::MODEL_NAME, Some(&vocab.hash()))?)
}

pub fn load_compression(path: &Path, vocab: &Vocabulary) -> Result<CompressionModel> {
    CompressionModel::from_checkpoint(load_checkpoint(path, compression::MODEL_NAME, Some(&vocab.hash()))?)
}

/// Writes the bundled toy splits as `train.jsonl`, `valid.jsonl`, `test.jsonl`.
pub fn toy_corpus(cfg: &RunConfig) -> Result<String> {
    let dir = cfg.need(&cfg.out, "out")?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut report = String::new();
    for (name, records) in crate::toy::toy_splits(cfg.seed) {
        let path = dir.join(format!("{name}.jsonl"));
        write_corpus(&path, &records)?;
        writeln!(report, "{}: {} documents", path.display(), records.len()).unwrap();
    }
    Ok(report)
}

pub fn make_vocab(cfg: &RunConfig) -> Result<String> {
    let corpus = load_split(cfg.need(&cfg.corpus, "corpus")?, Split::Train, None)?;
    let vocab = build_vocab(&corpus.records, cfg.min_count)?;
    vocab.save(cfg.need(&cfg.out, "out")?)?;
    Ok(format!("{} tokens, hash {}\n", vocab.len(), vocab.hash()))
}

/// Greedy oracle labels. With `exact_oracle`, documents of at most 12
/// sentences are also searched exhaustively and the report counts how often
/// greedy selection reached the best subset of at most `max_select` sentences.
pub fn make_labels(cfg: &RunConfig, exact_oracle: bool) -> Result<String> {
    let corpus = load_split(cfg.need(&cfg.corpus, "corpus")?, Split::Train, None)?;
    let rows: Vec<(String, LabelSequence)> = corpus
        .records
        .iter()
        .map(|r| (r.id().to_string(), oracle_labels(&r.document, &r.summary, cfg.max_select)))
        .collect();
    labeling::write_labels(cfg.need(&cfg.out, "out")?, &rows)?;
    let selected: usize = rows.iter().map(|(_, l)| l.ones()).sum();
    let mut report = format!("{} documents, {} sentences selected\n", rows.len(), selected);
    if exact_oracle {
        let (mut checked, mut optimal) = (0, 0);
        for (r, (_, l)) in corpus.records.iter().zip(&rows) {
            let n = r.document.len();
            if n > latent::MAX_ENUMERATION_SENTENCES {
                continue;
            }
            let score = |bits: &[usize]| rouge_mean(&summary_sentences(&r.document, bits), &r.summary.sentences);
            let greedy = score(&l.selected());
            let best = (0u32..1 << n)
                .filter(|m| m.count_ones() as usize <= cfg.max_select)
                .map(|m| score(&(0..n).filter(|i| m >> i & 1 == 1).collect::<Vec<_>>()))
                .fold(0.0, f64::max);
            checked += 1;
            optimal += usize::from(greedy >= best - 1e-12);
        }
        writeln!(report, "exact oracle: greedy optimal on {optimal} of {checked} documents").unwrap();
    }
    Ok(report)
}

pub fn make_pairs(cfg: &RunConfig) -> Result<String> {
    let corpus = load_split(cfg.need(&cfg.corpus, "corpus")?, Split::Train, None)?;
    let pairs: Vec<_> = corpus
        .records
        .iter()
        .flat_map(|r| compression_pairs(&r.document, &r.summary))
        .collect();
    labeling::write_pairs(cfg.need(&cfg.out, "out")?, &pairs)?;
    Ok(format!("{} pairs\n", pairs.len()))
}

pub fn train_extractive(cfg: &RunConfig) -> Result<String> {
    let vocab = load_vocab(cfg)?;
    let train = load_split(cfg.need(&cfg.corpus, "corpus")?, Split::Train, Some(&vocab))?;
    let labels = labels_for(&train.records, read_labels(cfg.need(&cfg.labels, "labels")?)?)?;
    let valid = match &cfg.valid {
        Some(p) => Some(load_split(p, Split::Valid, Some(&vocab))?),
        None => None,
    };
    let out = cfg.need(&cfg.out, "out")?;
    let mut mc = ExtractiveConfig::new(vocab.len(), cfg.hidden);
    mc.dropout = cfg.dropout;
    mc.word_dropout = cfg.word_dropout;
    let model = ExtractiveModel::new(mc, &mut seeded_rng(cfg.seed))?;
    let tc = cfg.train_config(cfg.extractive_lr, cfg.extractive_epochs);
    let mut report = String::new();
    let trained = extractive::train_extractive(
        model,
        &train.records,
        &labels,
        valid.as_ref().map(|v| v.records.as_slice()),
        &tc,
        |m| {
            writeln!(
                report,
                "epoch {} loss {:.6} accuracy {:.4} valid_rouge {}",
                m.epoch,
                m.train_loss,
                m.train_accuracy,
                m.valid_rouge.map_or("-".into(), |r| format!("{r:.6}"))
            )
            .unwrap()
        },
    )?;
    write_metrics(cfg, &trained.metrics)?;
    save_checkpoint(
        out,
        extractive::MODEL_NAME,
        &trained.model.params,
        &trained.model.config_json(),
        &vocab.hash(),
    )?;
    writeln!(report, "kept epoch {}", trained.best_epoch).unwrap();
    Ok(report)
}

fn encode_pairs(pairs: Vec<labeling::CompressionPair>, vocab: &Vocabulary) -> Vec<labeling::CompressionPair> {
    pairs
        .into_iter()
        .map(|p| labeling::CompressionPair {
            source: p.source.with_ids(vocab),
            target: p.target.with_ids(vocab),
            doc_id: p.doc_id,
        })
        .collect()
}

/// Trains the compression scorer. `valid_pairs` is an optional pair file.
pub fn train_compression(cfg: &RunConfig, valid_pairs: Option<&Path>) -> Result<String> {
    let vocab = load_vocab(cfg)?;
    let pairs = encode_pairs(read_pairs(cfg.need(&cfg.pairs, "pairs")?)?, &vocab);
    let valid = match valid_pairs {
        Some(p) => Some(encode_pairs(read_pairs(p)?, &vocab)),
        None => None,
    };
    let out = cfg.need(&cfg.out, "out")?;
    let mut mc = CompressionConfig::new(vocab.len(), cfg.hidden);
    mc.dropout = cfg.dropout;
    let model = CompressionModel::new(mc, &mut seeded_rng(cfg.seed))?;
    let tc = cfg.train_config(cfg.compression_lr, cfg.compression_epochs);
    let mut report = String::new();
    let trained = compression::train_compression(model, &pairs, valid.as_deref(), &tc, |m| {
        writeln!(
            report,
            "epoch {} train_perplexity {:.6} valid_perplexity {}",
            m.epoch,
            m.train_perplexity,
            m.valid_perplexity.map_or("-".into(), |p| format!("{p:.6}"))
        )
        .unwrap()
    })?;
    write_metrics(cfg, &trained.metrics)?;
    save_checkpoint(
        out,
        compression::MODEL_NAME,
        &trained.model.params,
        &trained.model.config_json(),
        &vocab.hash(),
    )?;
    writeln!(report, "kept epoch {}", trained.best_epoch).unwrap();
    Ok(report)
}

/// REINFORCE fine-tuning. `checkpoint` is the pretrained extractive model,
/// `scorer` the compression model; the tuned extractive model goes to `out`
/// and the per-document reward trace to `log`.
pub fn train_latent(cfg: &RunConfig, exact_oracle: bool) -> Result<String> {
    let vocab = load_vocab(cfg)?;
    let train = load_split(cfg.need(&cfg.corpus, "corpus")?, Split::Train, Some(&vocab))?;
    let model = load_extractive(cfg.need(&cfg.checkpoint, "checkpoint")?, &vocab)?;
    let scorer = load_compression(cfg.need(&cfg.scorer, "scorer")?, &vocab)?;
    let out = cfg.need(&cfg.out, "out")?;
    let lc = cfg.latent_config();
    let mut report = String::new();
    if exact_oracle {
        if let Some(r) = train
            .records
            .iter()
            .find(|r| r.document.len() <= latent::MAX_ENUMERATION_SENTENCES)
        {
            let table = latent::ScoreTable::compute(&scorer, &r.document, &r.summary)?;
            let exact = latent::exhaustive_expectation(&model, &r.document, &table, lc.alpha)?;
            writeln!(
                report,
                "exact oracle on {:?}: E[R] {:.6} over {} label sequences",
                r.id(),
                exact.expected_reward,
                exact.outcomes.len()
            )
            .unwrap();
        }
    }
    let trained = latent::train_latent(model, &train.records, &scorer, &lc, |e| {
        writeln!(
            report,
            "epoch {} reward {:.6} r_p {:.6} r_r {:.6} baseline_mse {:.6}",
            e.epoch, e.mean_reward, e.mean_r_p, e.mean_r_r, e.mean_baseline_mse
        )
        .unwrap()
    })?;
    write_metrics(cfg, &trained.log)?;
    save_checkpoint(
        out,
        extractive::MODEL_NAME,
        &trained.model.params,
        &trained.model.config_json(),
        &vocab.hash(),
    )?;
    Ok(report)
}

/// Top-k extraction in document order. With `compress`, each extracted
/// sentence is rewritten by greedy decoding with the compression model.
pub fn summarize(cfg: &RunConfig, compress: bool) -> Result<String> {
    let vocab = load_vocab(cfg)?;
    let corpus = load_split(cfg.need(&cfg.corpus, "corpus")?, Split::Test, Some(&vocab))?;
    let model = load_extractive(cfg.need(&cfg.checkpoint, "checkpoint")?, &vocab)?;
    let scorer = if compress {
        Some(load_compression(cfg.need(&cfg.scorer, "scorer")?, &vocab)?)
    } else {
        None
    };
    let mut rows = Vec::with_capacity(corpus.records.len());
    for r in &corpus.records {
        let (picked, _) = model.select_top_k(&r.document, cfg.k)?;
        let mut sentences = summary_sentences(&r.document, &picked);
        if let Some(s) = &scorer {
            sentences = sentences
                .iter()
                .map(|x| s.decode_greedy(x, cfg.max_compress_len, &vocab))
                .collect::<Result<Vec<Sentence>>>()?;
        }
        rows.push(SummaryRow {
            id: r.id().to_string(),
            summary: sentences.iter().map(Sentence::text).collect(),
        });
    }
    write_jsonl(cfg.need(&cfg.out, "out")?, &rows)?;
    Ok(format!("{} summaries\n", rows.len()))
}

pub fn lead3(cfg: &RunConfig) -> Result<String> {
    let corpus = load_split(cfg.need(&cfg.corpus, "corpus")?, Split::Test, None)?;
    let rows: Vec<SummaryRow> = corpus
        .records
        .iter()
        .map(|r| SummaryRow {
            id: r.id().to_string(),
            summary: r.document.sentences.iter().take(cfg.k).map(Sentence::text).collect(),
        })
        .collect();
    write_jsonl(cfg.need(&cfg.out, "out")?, &rows)?;
    Ok(format!("{} summaries\n", rows.len()))
}

/// Scores one summary file against the gold corpus.
pub fn score_system(gold: &Corpus, path: &Path) -> Result<RougeTriple> {
    let rows: Vec<(usize, SummaryRow)> = read_jsonl(path)?;
    let mut by_id = BTreeMap::new();
    for (line, row) in rows {
        if by_id.insert(row.id.clone(), row).is_some() {
            return Err(Error::MalformedLine {
                line,
                message: "duplicate summary id".into(),
            });
        }
    }
    if by_id.len() != gold.records.len() {
        return Err(Error::Data(format!(
            "{} has {} summaries for {} gold records",
            path.display(),
            by_id.len(),
            gold.records.len()
        )));
    }
    let mut scores = Vec::with_capacity(gold.records.len());
    for r in &gold.records {
        let row = by_id
            .get(r.id())
            .ok_or_else(|| Error::Data(format!("{} has no summary for {:?}", path.display(), r.id())))?;
        let cand = row
            .summary
            .iter()
            .filter(|s| !s.trim().is_empty())
            .map(|s| crate::corpus::tokenize(s))
            .collect::<Result<Vec<_>>>()?;
        scores.push(RougeTriple::compute(&cand, &r.summary.sentences));
    }
    Ok(RougeTriple::average(&scores))
}

pub fn format_table(rows: &[(String, RougeTriple)]) -> String {
    let mut out = String::new();
    writeln!(
        out,
        "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "system", "R1-P", "R1-R", "R1-F", "R2-P", "R2-R", "R2-F", "RL-P", "RL-R", "RL-F"
    )
    .unwrap();
    let cells = |s: &RougeScore| format!("{:>8.4} {:>8.4} {:>8.4}", s.precision, s.recall, s.f1);
    for (name, t) in rows {
        writeln!(
            out,
            "{:<12} {} {} {}",
            name,
            cells(&t.rouge_1),
            cells(&t.rouge_2),
            cells(&t.rouge_l)
        )
        .unwrap();
    }
    out
}

/// ROUGE table for each `(name, summary file)` against the gold corpus.
pub fn evaluate(cfg: &RunConfig, systems: &[(String, PathBuf)]) -> Result<String> {
    if systems.is_empty() {
        return Err(Error::Config("evaluate needs at least one --system NAME=PATH".into()));
    }
    let gold = load_split(cfg.need(&cfg.corpus, "corpus")?, Split::Test, None)?;
    let rows = systems
        .iter()
        .map(|(name, path)| Ok((name.clone(), score_system(&gold, path)?)))
        .collect::<Result<Vec<_>>>()?;
    let table = format_table(&rows);
    if let Some(out) = &cfg.out {
        atomic_write(out, table.as_bytes())?;
    }
    Ok(table)
}

/// Parses `NAME=PATH`; a bare path is named after its file stem.
pub fn parse_system(spec: &str) -> Result<(String, PathBuf)> {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.into(), path.into())),
        Some(_) => Err(Error::Config(format!("bad --system value {spec:?}, expected NAME=PATH"))),
        None => {
            let path = PathBuf::from(spec);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_string());
            Ok((name, path))
        }
    }
}
