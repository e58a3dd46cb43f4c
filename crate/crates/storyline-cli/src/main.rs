//! Command-line front-end: fit, stream, baseline, eval, and synth
//! subcommands over the storyline clustering library.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
//! malformed input, schema mismatches, out-of-order streams).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;

#[derive(Parser)]
#[command(
    name = "storyline",
    version,
    about = "Storyline clustering over timestamped short documents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Offline clustering of a full corpus.
    Fit(FitArgs),
    /// Online clustering of a time-ordered stream with a lag window.
    Stream(StreamArgs),
    /// Time-blind finite-mixture clustering of a full corpus.
    Baseline(BaselineArgs),
    /// Score predicted assignments against gold clusters.
    Eval(EvalArgs),
    /// Generate a planted-storyline corpus with gold clusters.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    /// One JSON object per line: {"id", "timestamp", "text"}.
    Jsonl,
    /// id<TAB>timestamp<TAB>text
    Tsv,
}

#[derive(Args)]
struct FitArgs {
    /// Corpus file to cluster.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
    /// Directory for assignments.jsonl, trace.csv, and config.json.
    #[arg(long)]
    out_dir: PathBuf,
    /// Self-link mass: weight of starting a new storyline.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Time-decay scale in timestamp units (seconds for Unix times).
    #[arg(long, default_value_t = 86_400.0)]
    decay_scale: f64,
    /// Dirichlet concentration per word; estimated from the corpus when
    /// omitted.
    #[arg(long)]
    eta: Option<f64>,
    /// Gibbs sweeps over the corpus.
    #[arg(long, default_value_t = 500)]
    iterations: usize,
    /// Annealing temperature on the schedule tail.
    #[arg(long, default_value_t = 2.0)]
    temperature: f64,
    /// Fraction of iterations completed before annealing starts.
    #[arg(long, default_value_t = 0.8)]
    anneal_start_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Independent chains run in parallel; the result with the best
    /// final joint log probability is kept.
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// Interleave gradient updates of alpha and decay-scale with
    /// sampling.
    #[arg(long)]
    adapt_hyper: bool,
    /// Sweeps between hyperparameter updates (with --adapt-hyper).
    #[arg(long, default_value_t = 10)]
    hyper_every: usize,
    /// Log-space step size for hyperparameter updates.
    #[arg(long, default_value_t = 0.01)]
    hyper_step: f64,
}

#[derive(Args)]
struct StreamArgs {
    /// Corpus file, consumed in file order; timestamps must be
    /// non-decreasing.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
    /// Directory for assignments.jsonl, trace.csv, and config.json.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 86_400.0)]
    decay_scale: f64,
    #[arg(long)]
    eta: Option<f64>,
    /// Lag window in timestamp units; links of older documents freeze.
    #[arg(long, default_value_t = 432_000)]
    window_lag: i64,
    /// Gibbs passes over the window per arriving document.
    #[arg(long, default_value_t = 500)]
    budget: usize,
    #[arg(long, default_value_t = 2.0)]
    temperature: f64,
    #[arg(long, default_value_t = 0.8)]
    anneal_start_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Process only the first N records of the input.
    #[arg(long)]
    limit: Option<usize>,
    /// Write a resumable checkpoint here after processing.
    #[arg(long)]
    checkpoint_out: Option<PathBuf>,
    /// Resume from a checkpoint written by --checkpoint-out; sampler
    /// settings then come from the checkpoint, not from flags.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Write a per-push timing CSV here.
    #[arg(long)]
    timing_log: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
    #[arg(long)]
    out_dir: PathBuf,
    /// Number of mixture components.
    #[arg(long, default_value_t = 20)]
    k: usize,
    /// Symmetric Dirichlet parameter over mixture weights.
    #[arg(long, default_value_t = 0.5)]
    dirichlet: f64,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, default_value_t = 500)]
    iterations: usize,
    #[arg(long, default_value_t = 2.0)]
    temperature: f64,
    #[arg(long, default_value_t = 0.8)]
    anneal_start_fraction: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Corpus the predictions refer to (timestamps pick cluster
    /// representatives).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Jsonl)]
    format: Format,
    /// Predicted assignments (assignments.jsonl from fit/stream/baseline).
    #[arg(long)]
    predictions: PathBuf,
    /// Gold clusters, one JSON object per line:
    /// {"cluster", "weight", "members"}.
    #[arg(long)]
    gold: PathBuf,
    /// Also write the metrics JSON here.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for corpus.jsonl, gold.jsonl, and config.json.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 30)]
    docs_per_cluster: usize,
    /// Disjoint vocabulary size per storyline.
    #[arg(long, default_value_t = 5)]
    words_per_cluster: usize,
    /// Vocabulary shared across storylines (0 = fully disjoint).
    #[arg(long, default_value_t = 0)]
    shared_words: usize,
    /// Probability that a token comes from the shared vocabulary.
    #[arg(long, default_value_t = 0.0)]
    shared_fraction: f64,
    #[arg(long, default_value_t = 8)]
    tokens_per_doc: usize,
    /// Timestamp of the first storyline's center.
    #[arg(long, default_value_t = 0)]
    first_center: i64,
    /// Time between consecutive storyline centers.
    #[arg(long, default_value_t = 864_000)]
    center_gap: i64,
    /// Uniform half-width of timestamps around each center.
    #[arg(long, default_value_t = 43_200)]
    spread: i64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let fine = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if fine { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    let outcome = match cli.command {
        Command::Fit(args) => commands::run_fit(args),
        Command::Stream(args) => commands::run_stream(args),
        Command::Baseline(args) => commands::run_baseline_cmd(args),
        Command::Eval(args) => commands::run_eval(args),
        Command::Synth(args) => commands::run_synth(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
