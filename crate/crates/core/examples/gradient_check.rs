// Finite-difference check of the extractive model's label loss.

use latsum::corpus::{Document, Sentence, Vocabulary};
use latsum::extractive::{ExtractiveConfig, ExtractiveModel};
use latsum::labeling::LabelSequence;
use latsum::numerics::{check_gradients, seeded_rng};

pub fn run_example() -> latsum::Result<()> {
    let json = r#"{"specials":["<pad>","<unk>","<bos>","<eos>"],"tokens":[["a",1],["b",1],["c",1],["d",1]]}"#;
    let vocab = Vocabulary::from_json(json)?;
    let sent = |w: &[&str]| Sentence::new(w.iter().copied()).map(|s| s.with_ids(&vocab));
    let doc = Document {
        id: "g".into(),
        sentences: vec![sent(&["a", "b"])?, sent(&["c"])?, sent(&["d", "a", "c"])?],
    };
    let labels = LabelSequence(vec![1, 0, 1]);

    let mut model = ExtractiveModel::new(ExtractiveConfig::new(vocab.len(), 4), &mut seeded_rng(3))?;
    let template = model.clone();
    let report = check_gradients(&mut model.params, 300, 1e-5, &mut seeded_rng(4), |g, store| {
        let mut m = template.clone();
        m.params = store.clone();
        // Same dropout masks on every evaluation.
        let (loss, _) = m.nll(g, &doc, &labels, &mut seeded_rng(5))?;
        Ok(loss)
    })?;
    println!(
        "{} coordinates, max relative error {:.2e}, worst {:?}",
        report.coordinates, report.max_rel_error, report.worst
    );
    assert!(report.passes(1e-4));
    Ok(())
}

fn main() -> latsum::Result<()> {
    run_example()
}
