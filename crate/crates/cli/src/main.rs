//! `irgraph`: heterogeneous program graphs from LLVM IR, the graph encoder,
//! soft-prompt export and the benchmark harness behind one binary.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "irgraph", version, about, propagate_version = true)]
#[command(
    after_help = "Environment:\n  IRGRAPH_THREADS  caps the worker threads used for parallel work\n  RUST_LOG         overrides the log filter"
)]
pub struct Cli {
    /// Machine-readable JSON on stdout; errors as JSON on stderr.
    #[arg(long, global = true)]
    pub json: bool,

    /// More log output on stderr (repeat for more).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    /// Feature spec (JSON) used when building graphs from .ll files.
    #[arg(long, global = true, value_name = "SPEC")]
    pub feature_spec: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse LLVM IR text and summarise the module.
    Parse(ParseArgs),
    /// Build the heterogeneous graph of an IR file and optionally store it.
    Graph(GraphArgs),
    /// Masked-node pretraining of the graph encoder over a corpus directory.
    Pretrain(PretrainArgs),
    /// Soft-prompt fine-tuning of the encoder against a frozen language model.
    Finetune(FinetuneArgs),
    /// Print the graph embedding, and optionally node embeddings, as JSON.
    Embed(EmbedArgs),
    /// Write a graph's prompt prefix rows as a binary f32 matrix.
    PromptExport(PromptExportArgs),
    /// Train one classifier per ablated graph variant and compare them.
    Ablate(AblateArgs),
    /// Evaluate a trained classifier on a labeled corpus.
    Eval(EvalArgs),
    /// Train the encoder and a classification head on a labeled corpus.
    Train(TrainArgs),
    /// Generate a labeled toy corpus with its manifests.
    MakeCorpus(MakeCorpusArgs),
    /// Write a randomly initialised toy language model.
    MakeLm(MakeLmArgs),
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    pub file: PathBuf,
    /// Skip unsupported constructs instead of failing on the first.
    #[arg(long)]
    pub lenient: bool,
    /// Also count every construct outside the supported subset.
    #[arg(long)]
    pub report_subset: bool,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// An .ll file, or an .irg file to re-validate and summarise.
    pub file: PathBuf,
    /// Where to store the graph (.irg).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Skip unsupported constructs and clamp feature overflows.
    #[arg(long)]
    pub lenient: bool,
}

/// Optimizer and model flags shared by the training commands. Each one
/// overrides the same key of `--config`.
#[derive(Debug, Args)]
pub struct OptimFlags {
    /// JSON config file; flags below override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ModelFlags {
    /// Width of both message-passing layers.
    #[arg(long)]
    pub hidden: Option<usize>,
    /// Embedding width (must match the language model for soft prompts).
    #[arg(long)]
    pub embed: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Directory of .ll / .irg files.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// JSON-lines metrics log (default: <output>.metrics.jsonl).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub optim: OptimFlags,
    #[command(flatten)]
    pub model: ModelFlags,
    /// Run exactly this many optimizer steps instead of whole epochs.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub mask_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FinetuneArgs {
    /// Directory holding samples.jsonl ({graph, question, answer} per line).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Frozen language model checkpoint.
    #[arg(long)]
    pub lm: PathBuf,
    /// Encoder checkpoint to start from.
    #[arg(long)]
    pub gnn: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// JSON-lines metrics log (default: <output>.metrics.jsonl).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub optim: OptimFlags,
    /// Keep at most this many node rows per prompt.
    #[arg(long)]
    pub node_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// An .irg or .ll file.
    pub file: PathBuf,
    /// Encoder checkpoint.
    #[arg(long, alias = "gnn")]
    pub params: PathBuf,
    /// Include per-node embeddings in canonical order.
    #[arg(long)]
    pub nodes: bool,
}

#[derive(Debug, Args)]
pub struct PromptExportArgs {
    /// An .irg or .ll file.
    pub file: PathBuf,
    #[arg(long)]
    pub gnn: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    /// Keep at most this many node rows.
    #[arg(long)]
    pub node_cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Corpus directory (with manifest.jsonl) or a manifest file.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Toy task to generate into --corpus when it has no manifest yet.
    #[arg(long)]
    pub task: Option<String>,
    /// Items to generate for --task.
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    /// Metric (accuracy, error-rate, pairwise); default pairwise when every
    /// item has a pair id, else accuracy.
    #[arg(long)]
    pub metric: Option<String>,
    /// Comma-separated variants such as full,edge:cfg,node:type (default all).
    #[arg(long, value_delimiter = ',')]
    pub targets: Vec<String>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub optim: OptimFlags,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Held-out fraction (whole pairs stay together).
    #[arg(long)]
    pub holdout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Corpus directory (with manifest.jsonl) or a manifest file.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Checkpoint with a classification head.
    #[arg(long)]
    pub gnn: PathBuf,
    #[arg(long, default_value = "accuracy")]
    pub metric: String,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory (with manifest.jsonl) or a manifest file.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Encoder checkpoint to start from (default: fresh initialisation).
    #[arg(long)]
    pub gnn: Option<PathBuf>,
    #[arg(short, long)]
    pub output: PathBuf,
    /// JSON-lines per-epoch log (default: <output>.metrics.jsonl).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub optim: OptimFlags,
    #[command(flatten)]
    pub model: ModelFlags,
    #[arg(long)]
    pub batch_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct MakeCorpusArgs {
    /// cfg-loop, value-kind or pairwise.
    #[arg(long)]
    pub task: String,
    #[arg(long, default_value_t = 200)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    /// Fraction of items (whole pairs) listed in test.jsonl.
    #[arg(long, default_value_t = 0.2)]
    pub holdout: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct MakeLmArgs {
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 256)]
    pub dim: usize,
    #[arg(long, default_value_t = 512)]
    pub hidden: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 1024)]
    pub context: usize,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // Help and version exit 0; real usage errors exit 2.
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    init_logging(cli.verbose);
    let json_errors = cli.json;
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (exit, code) = error::classify(&err);
            if json_errors {
                let e = json!({"error": {"code": code, "exit": exit, "message": error::render(&err)}});
                eprintln!("{e}");
            } else {
                eprintln!("error[{code}]: {}", error::render(&err));
            }
            ExitCode::from(exit as u8)
        }
    }
}
