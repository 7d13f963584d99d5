// Greedy oracle labels and compression pairs for one toy document.

use std::path::Path;

use latsum::corpus::{load_corpus, Split};
use latsum::labeling::{compression_pairs, oracle_labels};

pub fn run_example() -> latsum::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/train.jsonl");
    let corpus = load_corpus(&path, Split::Train)?;
    let record = &corpus.records[1];

    let labels = oracle_labels(&record.document, &record.summary, 3);
    for (i, s) in record.document.sentences.iter().enumerate() {
        println!("[{}] {}", labels.get(i), s.text());
    }
    println!("summary:");
    for s in &record.summary.sentences {
        println!("    {}", s.text());
    }
    for pair in compression_pairs(&record.document, &record.summary) {
        println!("pair: {}  =>  {}", pair.source.text(), pair.target.text());
    }
    Ok(())
}

fn main() -> latsum::Result<()> {
    run_example()
}
