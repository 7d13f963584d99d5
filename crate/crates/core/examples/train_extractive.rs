// Supervised training of the sentence extractor on oracle labels.

use std::path::Path;

use latsum::corpus::{build_vocab, load_corpus, Split};
use latsum::extractive::{mean_rouge_top_k, train_extractive, ExtractiveConfig, ExtractiveModel, TrainConfig};
use latsum::labeling::oracle_labels;
use latsum::numerics::seeded_rng;

pub fn run_example() -> latsum::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    let train = load_corpus(&dir.join("train.jsonl"), Split::Train)?;
    let valid = load_corpus(&dir.join("valid.jsonl"), Split::Valid)?;
    let vocab = build_vocab(&train.records, 1)?;
    let (train, valid) = (train.encoded(&vocab), valid.encoded(&vocab));
    let labels: Vec<_> = train
        .records
        .iter()
        .map(|r| oracle_labels(&r.document, &r.summary, 3))
        .collect();

    let model = ExtractiveModel::new(ExtractiveConfig::new(vocab.len(), 12), &mut seeded_rng(1))?;
    let cfg = TrainConfig {
        epochs: 8,
        batch_size: 1,
        ..TrainConfig::default()
    };
    let trained = train_extractive(model, &train.records, &labels, Some(&valid.records), &cfg, |m| {
        println!(
            "epoch {:>2}  loss {:.4}  label accuracy {:.3}  valid rouge {:.4}",
            m.epoch,
            m.train_loss,
            m.train_accuracy,
            m.valid_rouge.unwrap_or(f64::NAN)
        )
    })?;
    println!("kept epoch {}", trained.best_epoch);

    let doc = &valid.records[0].document;
    let (picked, probs) = trained.model.select_top_k(doc, 3)?;
    for i in picked {
        println!("p={:.3}  {}", probs[i], doc.sentences[i].text());
    }
    println!("valid rouge_mean {:.4}", mean_rouge_top_k(&trained.model, &valid.records, 3)?);
    Ok(())
}

fn main() -> latsum::Result<()> {
    run_example()
}
