// Train the attention seq2seq compression model and use it as a sentence scorer.

use std::path::Path;

use latsum::compression::{train_compression, CompressionConfig, CompressionModel};
use latsum::corpus::{build_vocab, load_corpus, Split};
use latsum::extractive::TrainConfig;
use latsum::labeling::{compression_pairs, CompressionPair};
use latsum::numerics::seeded_rng;

pub fn run_example() -> latsum::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let train = load_corpus(&dir.join("train.jsonl"), Split::Train)?;
    let vocab = build_vocab(&train.records, 1)?;
    let pairs: Vec<CompressionPair> = train
        .encoded(&vocab)
        .records
        .iter()
        .flat_map(|r| compression_pairs(&r.document, &r.summary))
        .collect();

    let model = CompressionModel::new(CompressionConfig::new(vocab.len(), 16), &mut seeded_rng(2))?;
    let cfg = TrainConfig {
        epochs: 40,
        batch_size: 1,
        ..TrainConfig::default()
    };
    let (fit, held) = pairs.split_at(pairs.len() - 10);
    let trained = train_compression(model, fit, Some(held), &cfg, |m| {
        if m.epoch % 10 != 0 {
            return;
        }
        println!(
            "epoch {}  train perplexity {:.3}  valid perplexity {:.3}",
            m.epoch,
            m.train_perplexity,
            m.valid_perplexity.unwrap_or(f64::NAN)
        )
    })?;

    let pair = &held[0];
    let s = trained.model.s_score(&pair.source, &pair.target)?;
    let swapped = trained.model.s_score(&held[1].source, &pair.target)?;
    println!("source: {}", pair.source.text());
    println!("target: {}", pair.target.text());
    println!("score against its own source {s:.4}, against another sentence {swapped:.4}");
    println!("greedy: {}", trained.model.decode_greedy(&pair.source, 12, &vocab)?.text());
    Ok(())
}

fn main() -> latsum::Result<()> {
    run_example()
}
