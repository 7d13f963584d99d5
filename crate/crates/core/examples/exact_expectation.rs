// Exact expected reward by enumerating every label sequence of a short
// document, compared with the Monte-Carlo REINFORCE estimate.

use latsum::corpus::{Document, Sentence, SummarySet, Vocabulary};
use latsum::compression::{CompressionConfig, CompressionModel};
use latsum::extractive::{ExtractiveConfig, ExtractiveModel};
use latsum::latent::{exhaustive_expectation, reinforce_step, LatentConfig, ScoreTable};
use latsum::numerics::seeded_rng;

pub fn run_example() -> latsum::Result<()> {
    let json = r#"{"specials":["<pad>","<unk>","<bos>","<eos>"],"tokens":[["x",1],["y",1],["z",1],["w",1]]}"#;
    let vocab = Vocabulary::from_json(json)?;
    let sent = |w: &[&str]| Sentence::new(w.iter().copied()).map(|s| s.with_ids(&vocab));
    let doc = Document {
        id: "e".into(),
        sentences: vec![sent(&["x", "y"])?, sent(&["z"])?, sent(&["w", "x"])?, sent(&["y", "z", "w"])?],
    };
    let summary = SummarySet {
        sentences: vec![sent(&["x", "y"])?, sent(&["w"])?],
    };

    let scorer = CompressionModel::new(CompressionConfig::new(vocab.len(), 4), &mut seeded_rng(1))?;
    let table = ScoreTable::compute(&scorer, &doc, &summary)?;
    let mut policy = ExtractiveModel::new(ExtractiveConfig::new(vocab.len(), 4), &mut seeded_rng(2))?;

    let exact = exhaustive_expectation(&policy, &doc, &table, 0.5)?;
    println!("E[R] over {} sequences: {:.6}", exact.outcomes.len(), exact.expected_reward);

    let cfg = LatentConfig {
        policy_dropout: false,
        ..LatentConfig::default()
    };
    let n = 5_000;
    let mut rng = seeded_rng(3);
    let mut total = 0.0;
    policy.params.zero_grad();
    for _ in 0..n {
        total += reinforce_step(&mut policy, None, &doc, &table, &cfg, &mut rng)?.reward.r;
    }
    let estimate: Vec<f64> = policy.params.flat_grads().iter().map(|g| -g / n as f64).collect();
    let dot: f64 = estimate.iter().zip(&exact.gradient).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    println!("Monte-Carlo mean reward over {n} samples: {:.6}", total / n as f64);
    println!("gradient cosine similarity: {:.4}", dot / (norm(&estimate) * norm(&exact.gradient)));
    Ok(())
}

fn main() -> latsum::Result<()> {
    run_example()
}
