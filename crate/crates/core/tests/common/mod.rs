#![allow(dead_code)]

use std::path::{Path, PathBuf};

use latsum::cli::{self, RunConfig};
use latsum::compression::{CompressionConfig, CompressionModel};
use latsum::corpus::{Document, Sentence, SummarySet, Vocabulary, SPECIAL_TOKENS};
use latsum::extractive::{ExtractiveConfig, ExtractiveModel};
use latsum::numerics::{seeded_rng, Rng};
use rand::Rng as _;

pub fn toy_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy")
}

/// Vocabulary of the specials plus `w4 .. w{n-1}`.
pub fn vocab(n: usize) -> Vocabulary {
    let tokens: Vec<(String, usize)> = (4..n).map(|i| (format!("w{i}"), 1)).collect();
    let json = serde_json::json!({"specials": SPECIAL_TOKENS, "tokens": tokens});
    Vocabulary::from_json(&json.to_string()).unwrap()
}

pub fn random_sentence(rng: &mut Rng, vocab: &Vocabulary, max_len: usize) -> Sentence {
    let len = rng.gen_range(1..=max_len);
    let words: Vec<String> = (0..len)
        .map(|_| format!("w{}", rng.gen_range(4..vocab.len())))
        .collect();
    Sentence::new(words).unwrap().with_ids(vocab)
}

pub fn random_doc(rng: &mut Rng, vocab: &Vocabulary, sentences: usize, max_len: usize) -> Document {
    Document {
        id: "doc".into(),
        sentences: (0..sentences).map(|_| random_sentence(rng, vocab, max_len)).collect(),
    }
}

pub fn random_summary(rng: &mut Rng, vocab: &Vocabulary, sentences: usize, max_len: usize) -> SummarySet {
    SummarySet {
        sentences: (0..sentences).map(|_| random_sentence(rng, vocab, max_len)).collect(),
    }
}

pub fn extractive(vocab: usize, hidden: usize, seed: u64) -> ExtractiveModel {
    ExtractiveModel::new(ExtractiveConfig::new(vocab, hidden), &mut seeded_rng(seed)).unwrap()
}

pub fn compression(vocab: usize, hidden: usize, seed: u64) -> CompressionModel {
    CompressionModel::new(CompressionConfig::new(vocab, hidden), &mut seeded_rng(seed)).unwrap()
}

/// Output files of one end-to-end run, in stage order.
pub struct PipelineRun {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub reports: Vec<String>,
}

impl PipelineRun {
    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

/// Runs every stage on the bundled toy corpus with the bundled toy config,
/// overriding only the seed.
pub fn run_pipeline(dir: &Path, seed: u64) -> PipelineRun {
    let toy = toy_dir();
    let mut base = RunConfig::from_file(&toy.join("config.json")).unwrap();
    base.seed = seed;
    base.vocab = Some(dir.join("vocab.json"));
    let train = toy.join("train.jsonl");
    let test = toy.join("test.jsonl");
    let at = |name: &str| Some(dir.join(name));
    let stage = |edit: &dyn Fn(&mut RunConfig)| {
        let mut c = base.clone();
        edit(&mut c);
        c
    };
    let mut reports = Vec::new();
    let mut go = |r: latsum::Result<String>| reports.push(r.unwrap());

    go(cli::make_vocab(&stage(&|c| {
        c.corpus = Some(train.clone());
        c.out = at("vocab.json");
    })));
    go(cli::make_labels(
        &stage(&|c| {
            c.corpus = Some(train.clone());
            c.out = at("labels.jsonl");
        }),
        false,
    ));
    go(cli::make_pairs(&stage(&|c| {
        c.corpus = Some(train.clone());
        c.out = at("pairs.jsonl");
    })));
    go(cli::train_extractive(&stage(&|c| {
        c.corpus = Some(train.clone());
        c.valid = Some(toy.join("valid.jsonl"));
        c.labels = at("labels.jsonl");
        c.out = at("extract.ckpt");
        c.log = at("extract.metrics.jsonl");
    })));
    go(cli::train_compression(
        &stage(&|c| {
            c.pairs = at("pairs.jsonl");
            c.out = at("compress.ckpt");
            c.log = at("compress.metrics.jsonl");
        }),
        None,
    ));
    go(cli::train_latent(
        &stage(&|c| {
            c.corpus = Some(train.clone());
            c.checkpoint = at("extract.ckpt");
            c.scorer = at("compress.ckpt");
            c.out = at("latent.ckpt");
            c.log = at("reward_trace.jsonl");
        }),
        false,
    ));
    for (ckpt, out) in [("extract.ckpt", "extract.summaries.jsonl"), ("latent.ckpt", "latent.summaries.jsonl")] {
        go(cli::summarize(
            &stage(&|c| {
                c.corpus = Some(test.clone());
                c.checkpoint = at(ckpt);
                c.out = at(out);
            }),
            false,
        ));
    }
    go(cli::lead3(&stage(&|c| {
        c.corpus = Some(test.clone());
        c.out = at("lead3.summaries.jsonl");
    })));
    let systems: Vec<(String, PathBuf)> = ["lead3", "extract", "latent"]
        .iter()
        .map(|s| (s.to_string(), dir.join(format!("{s}.summaries.jsonl"))))
        .collect();
    go(cli::evaluate(
        &stage(&|c| {
            c.corpus = Some(test.clone());
            c.out = at("table.txt");
        }),
        &systems,
    ));
    let files = [
        "vocab.json",
        "labels.jsonl",
        "pairs.jsonl",
        "extract.ckpt",
        "extract.metrics.jsonl",
        "compress.ckpt",
        "compress.metrics.jsonl",
        "latent.ckpt",
        "reward_trace.jsonl",
        "extract.summaries.jsonl",
        "latent.summaries.jsonl",
        "lead3.summaries.jsonl",
        "table.txt",
    ]
    .iter()
    .map(|f| dir.join(f))
    .collect();
    PipelineRun {
        dir: dir.to_path_buf(),
        files,
        reports,
    }
}

/// Per-epoch mean of `r` from a reward trace.
pub fn epoch_rewards(trace: &Path) -> Vec<f64> {
    let rows: Vec<(usize, latsum::latent::RewardLogRow)> = latsum::io::read_jsonl(trace).unwrap();
    let epochs = rows.iter().map(|(_, r)| r.epoch).max().unwrap_or(0);
    (1..=epochs)
        .map(|e| {
            let rs: Vec<f64> = rows.iter().filter(|(_, r)| r.epoch == e).map(|(_, r)| r.r).collect();
            rs.iter().sum::<f64>() / rs.len() as f64
        })
        .collect()
}
