mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bridgeguard", version, about = "Detect cross-chain bridge attacks from transaction traces")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalOpts {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// JSON-RPC endpoint with a call tracer.
    #[arg(long, global = true, env = "BRIDGEGUARD_RPC_URL")]
    rpc_url: Option<String>,
    /// Output format for stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Base seed for splits, embeddings and classifiers.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker bound for batch stages.
    #[arg(long, global = true)]
    max_concurrency: Option<usize>,
    /// Directory caching raw RPC responses.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Table,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ClassifierKind {
    Knn,
    Tree,
}

#[derive(Args, Clone)]
struct ClassifierOpts {
    #[arg(long, value_enum)]
    classifier: Option<ClassifierKind>,
    /// Neighbour count for the KNN classifier.
    #[arg(long)]
    k: Option<usize>,
    /// Depth limit for the decision tree.
    #[arg(long)]
    max_depth: Option<usize>,
    /// Smallest leaf the decision tree may create.
    #[arg(long)]
    min_samples_leaf: Option<usize>,
    /// Inverse-frequency class weights for the decision tree.
    #[arg(long)]
    balanced: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch or parse traces and write normalized trace files.
    Ingest {
        /// Trace files or 0x transaction hashes.
        inputs: Vec<String>,
        /// JSONL manifest of `{source, label}` entries, ingested in addition to `inputs`.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Output directory for normalized traces and the ingest report.
        #[arg(long)]
        out: PathBuf,
        /// Also write each xTEG dump next to its trace.
        #[arg(long)]
        dump_graphs: bool,
    },
    /// Generate a labelled synthetic corpus.
    Synth {
        /// Output directory; receives traces/, manifest.jsonl and synth.json.
        #[arg(long)]
        out: PathBuf,
        /// Number of normal transactions.
        #[arg(long)]
        n_normal: Option<usize>,
        /// Attack count as a fraction of the normal count.
        #[arg(long)]
        attack_rate: Option<f64>,
        /// Share of attacks that are source-chain attacks.
        #[arg(long)]
        src_tgt_ratio: Option<f64>,
        /// Probability of inserting an unrelated oracle or fee call.
        #[arg(long)]
        extra_call_prob: Option<f64>,
        /// Probability of wrapping the entry call in an aggregator hop.
        #[arg(long)]
        depth_jitter: Option<f64>,
    },
    /// Train a detector on a labelled manifest and score it on a held-out split.
    Train {
        /// Labelled JSONL manifest.
        #[arg(long)]
        manifest: PathBuf,
        /// Detector JSON destination.
        #[arg(long)]
        model: PathBuf,
        /// Metrics JSON destination.
        #[arg(long)]
        metrics: Option<PathBuf>,
        #[command(flatten)]
        classifier: ClassifierOpts,
    },
    /// Repeated split/train/evaluate runs with mean and standard deviation.
    Evaluate {
        /// Labelled JSONL manifest.
        #[arg(long)]
        manifest: PathBuf,
        /// Number of repeated runs; seeds are base, base+1, ...
        #[arg(long)]
        runs: Option<usize>,
        /// Metrics JSON destination.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        classifier: ClassifierOpts,
    },
    /// Label transactions with a trained detector.
    Detect {
        /// Trace files or 0x transaction hashes.
        inputs: Vec<String>,
        /// Detector JSON written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Detections JSON destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-stage timing over a corpus.
    Bench {
        /// Labelled JSONL manifest with at least 100 transactions.
        #[arg(long)]
        manifest: PathBuf,
        /// Trained detector; one is fitted on the corpus when absent.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Report JSON destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(commands::Status::Success) => ExitCode::SUCCESS,
        Ok(commands::Status::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
