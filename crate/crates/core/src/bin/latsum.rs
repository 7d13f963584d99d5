use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use latsum::cli::{self, RunConfig};

#[derive(Parser)]
#[command(name = "latsum", about = "Latent-variable extractive summarization pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    pairs: Option<PathBuf>,
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Compression model checkpoint used as the reward scorer or compressor.
    #[arg(long)]
    scorer: Option<PathBuf>,
    /// Metrics or reward trace output (JSONL).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic toy corpus splits into --out DIR.
    ToyCorpus(Common),
    /// Build a vocabulary from the training corpus.
    MakeVocab(Common),
    /// Greedy ROUGE oracle labels for each document.
    MakeLabels {
        #[command(flatten)]
        common: Common,
        /// Also search small documents exhaustively and report greedy optimality.
        #[arg(long)]
        exact_oracle: bool,
    },
    /// Sentence-compression training pairs.
    MakePairs(Common),
    /// Supervised extractive training on oracle labels.
    TrainExtractive(Common),
    /// Train the compression scorer.
    TrainCompression {
        #[command(flatten)]
        common: Common,
        /// Validation pair file for checkpoint selection.
        #[arg(long)]
        valid_pairs: Option<PathBuf>,
    },
    /// REINFORCE fine-tuning of a pretrained extractive model.
    TrainLatent {
        #[command(flatten)]
        common: Common,
        /// Report the exact expected reward of one small document before training.
        #[arg(long)]
        exact_oracle: bool,
    },
    /// Top-k extractive summaries as JSONL.
    Summarize {
        #[command(flatten)]
        common: Common,
        /// Rewrite extracted sentences with the compression model (needs --scorer).
        #[arg(long)]
        compress: bool,
    },
    /// Score summary files against the gold corpus.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// NAME=PATH of a summary file; repeat for a multi-row table.
        #[arg(long = "system", required = true)]
        systems: Vec<String>,
    },
    /// First k (default 3) sentences of every document.
    Lead3(Common),
}

fn resolve(c: &Common) -> latsum::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    macro_rules! over {
        ($($f:ident),*) => { $( if let Some(v) = &c.$f { cfg.$f = v.clone(); } )* };
    }
    macro_rules! over_path {
        ($($f:ident),*) => { $( if let Some(v) = &c.$f { cfg.$f = Some(v.clone()); } )* };
    }
    over!(seed, k, alpha);
    over_path!(corpus, checkpoint, out, vocab, labels, pairs, valid, scorer, log);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cmd: Command) -> latsum::Result<String> {
    match cmd {
        Command::ToyCorpus(c) => cli::toy_corpus(&resolve(&c)?),
        Command::MakeVocab(c) => cli::make_vocab(&resolve(&c)?),
        Command::MakeLabels { common, exact_oracle } => cli::make_labels(&resolve(&common)?, exact_oracle),
        Command::MakePairs(c) => cli::make_pairs(&resolve(&c)?),
        Command::TrainExtractive(c) => cli::train_extractive(&resolve(&c)?),
        Command::TrainCompression { common, valid_pairs } => {
            cli::train_compression(&resolve(&common)?, valid_pairs.as_deref())
        }
        Command::TrainLatent { common, exact_oracle } => cli::train_latent(&resolve(&common)?, exact_oracle),
        Command::Summarize { common, compress } => cli::summarize(&resolve(&common)?, compress),
        Command::Evaluate { common, systems } => {
            let cfg = resolve(&common)?;
            let systems = systems
                .iter()
                .map(|s| cli::parse_system(s))
                .collect::<latsum::Result<Vec<_>>>()?;
            cli::evaluate(&cfg, &systems)
        }
        Command::Lead3(c) => cli::lead3(&resolve(&c)?),
    }
}

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("bad arguments").trim_start_matches("error: ");
            eprintln!("error E_CONFIG: {first}");
            return ExitCode::from(2);
        }
    };
    match run(args.command) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let kind = e.kind();
            eprintln!("error {}: {}", kind.code(), e.to_string().replace('\n', " "));
            ExitCode::from(kind.exit_code() as u8)
        }
    }
}
