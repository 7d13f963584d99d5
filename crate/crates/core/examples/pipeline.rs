// Every pipeline stage on the bundled toy corpus, ending in a ROUGE table
// for Lead3, the supervised extractor and the latent model.
//
// Outputs go to the directory given as the first argument (default
// `target/toy-run`).

use std::path::{Path, PathBuf};

use latsum::cli::{self, RunConfig};

pub fn run_in(out: &Path) -> latsum::Result<String> {
    let toy = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy");
    std::fs::create_dir_all(out).map_err(|e| latsum::Error::io(out, e))?;
    let base = RunConfig::from_file(&toy.join("config.json"))?;
    let at = |name: &str| Some(out.join(name));
    let train = Some(toy.join("train.jsonl"));
    let test = Some(toy.join("test.jsonl"));
    let with = |f: &dyn Fn(&mut RunConfig)| {
        let mut c = base.clone();
        c.vocab = at("vocab.json");
        f(&mut c);
        c
    };

    print!("{}", cli::make_vocab(&with(&|c| {
        c.corpus = train.clone();
        c.out = at("vocab.json");
    }))?);
    print!("{}", cli::make_labels(&with(&|c| {
        c.corpus = train.clone();
        c.out = at("labels.jsonl");
    }), true)?);
    print!("{}", cli::make_pairs(&with(&|c| {
        c.corpus = train.clone();
        c.out = at("pairs.jsonl");
    }))?);
    let report = cli::train_extractive(&with(&|c| {
        c.corpus = train.clone();
        c.valid = Some(toy.join("valid.jsonl"));
        c.labels = at("labels.jsonl");
        c.out = at("extract.ckpt");
    }))?;
    println!("extractive: {}", report.lines().last().unwrap_or(""));
    let report = cli::train_compression(&with(&|c| {
        c.pairs = at("pairs.jsonl");
        c.out = at("compress.ckpt");
    }), None)?;
    println!("compression: {}", report.lines().rev().nth(1).unwrap_or(""));
    print!("{}", cli::train_latent(&with(&|c| {
        c.corpus = train.clone();
        c.checkpoint = at("extract.ckpt");
        c.scorer = at("compress.ckpt");
        c.out = at("latent.ckpt");
        c.log = at("reward_trace.jsonl");
    }), false)?);
    for name in ["extract", "latent"] {
        cli::summarize(&with(&|c| {
            c.corpus = test.clone();
            c.checkpoint = at(&format!("{name}.ckpt"));
            c.out = at(&format!("{name}.jsonl"));
        }), false)?;
    }
    cli::lead3(&with(&|c| {
        c.corpus = test.clone();
        c.out = at("lead3.jsonl");
    }))?;
    let systems: Vec<(String, PathBuf)> = ["lead3", "extract", "latent"]
        .iter()
        .map(|s| (s.to_string(), out.join(format!("{s}.jsonl"))))
        .collect();
    cli::evaluate(&with(&|c| {
        c.corpus = test.clone();
        c.out = at("table.txt");
    }), &systems)
}

pub fn run_example() -> latsum::Result<()> {
    let dir = tempfile_dir();
    let table = run_in(&dir);
    let _ = std::fs::remove_dir_all(&dir);
    print!("{}", table?);
    Ok(())
}

fn tempfile_dir() -> PathBuf {
    std::env::temp_dir().join(format!("latsum-toy-run-{}", std::process::id()))
}

fn main() -> latsum::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../target/toy-run"));
    print!("{}", run_in(&out)?);
    println!("outputs in {}", out.display());
    Ok(())
}
