// Pretrain the extractor and the compression scorer on the toy corpus, then
// fine-tune the extractor with REINFORCE against the scorer's reward.

use std::path::Path;

use latsum::compression::{train_compression, CompressionConfig, CompressionModel};
use latsum::corpus::{build_vocab, load_corpus, Split};
use latsum::extractive::{mean_rouge_top_k, train_extractive, ExtractiveConfig, ExtractiveModel, TrainConfig};
use latsum::labeling::{compression_pairs, oracle_labels};
use latsum::latent::{train_latent, LatentConfig};
use latsum::numerics::seeded_rng;

pub fn run_example() -> latsum::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let train = load_corpus(&dir.join("train.jsonl"), Split::Train)?;
    let test = load_corpus(&dir.join("test.jsonl"), Split::Test)?;
    let vocab = build_vocab(&train.records, 1)?;
    let (train, test) = (train.encoded(&vocab), test.encoded(&vocab));
    let records = &train.records[..20];

    let cfg = TrainConfig {
        epochs: 10,
        batch_size: 1,
        ..TrainConfig::default()
    };
    let labels: Vec<_> = records.iter().map(|r| oracle_labels(&r.document, &r.summary, 3)).collect();
    let extractor = ExtractiveModel::new(ExtractiveConfig::new(vocab.len(), 12), &mut seeded_rng(1))?;
    let extractor = train_extractive(extractor, records, &labels, None, &cfg, |_| {})?.model;

    let pairs: Vec<_> = records
        .iter()
        .flat_map(|r| compression_pairs(&r.document, &r.summary))
        .collect();
    let scorer = CompressionModel::new(CompressionConfig::new(vocab.len(), 16), &mut seeded_rng(2))?;
    let scorer_cfg = TrainConfig {
        epochs: 40,
        ..cfg.clone()
    };
    let scorer = train_compression(scorer, &pairs, None, &scorer_cfg, |_| {})?.model;

    let before = mean_rouge_top_k(&extractor, &test.records, 3)?;
    let latent = train_latent(extractor, records, &scorer, &LatentConfig::default(), |e| {
        println!(
            "epoch {}  reward {:.4}  (precision {:.4}, recall {:.4})  baseline mse {:.5}",
            e.epoch, e.mean_reward, e.mean_r_p, e.mean_r_r, e.mean_baseline_mse
        )
    })?;
    let after = mean_rouge_top_k(&latent.model, &test.records, 3)?;
    println!("test rouge_mean: extract {before:.4}, latent {after:.4}");
    Ok(())
}

fn main() -> latsum::Result<()> {
    run_example()
}
