mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use uee_core::clock::Nanos;

#[derive(Parser)]
#[command(name = "ueescan", version, about = "Detect ultrafast extreme events in trade and quote tapes")]
struct Cli {
    /// Worker threads for symbol-day work (defaults to all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic fixture corpus with ground truth.
    Synth(SynthArgs),
    /// Ingest trades and detect events.
    Detect(DetectArgs),
    /// Per-event analytics, recovery curves and reports for detected events.
    Analyze(AnalyzeArgs),
    /// Rebuild the report tables from a finished run directory.
    Report(ReportArgs),
    /// Detect and analyze in one invocation.
    Run(RunArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    seed: u64,
    /// Corpus directory: trades/, quotes/ and ground_truth.json.
    #[arg(long)]
    out: PathBuf,
    /// One symbol on two dates instead of the full acceptance corpus.
    #[arg(long)]
    small: bool,
}

#[derive(Args, Clone)]
struct InputArgs {
    /// Trade files or directories of trade files.
    #[arg(long, num_args = 1.., required = true)]
    trades: Vec<PathBuf>,
    /// TOML input format descriptor; the canonical layout by default.
    #[arg(long)]
    format: Option<PathBuf>,
    /// symbol,company,sector table; restricts the run to its symbols.
    #[arg(long)]
    universe: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct CriteriaArgs {
    /// Net return the run must exceed in absolute value.
    #[arg(long, default_value_t = 0.008)]
    threshold: f64,
    /// Trades from the run start through the qualifying trade.
    #[arg(long, default_value_t = 11)]
    min_trades: usize,
    /// Exclusive bound on event duration; repeat for several criteria.
    #[arg(long, value_parser = parse_duration, default_value = "1.5s")]
    max_duration: Vec<Nanos>,
    /// Repeated prices end a run.
    #[arg(long)]
    strict_monotonic: bool,
}

#[derive(Args, Clone)]
struct AnalysisArgs {
    /// Quote files or directories of quote files.
    #[arg(long, num_args = 1..)]
    quotes: Vec<PathBuf>,
    /// Omit quote analytics (largest quote return, spread windows).
    #[arg(long)]
    skip_quotes: bool,
    /// Spread events on each side of the event start.
    #[arg(long, default_value_t = 400)]
    window: usize,
    /// Trades after the event used for recovery ratios.
    #[arg(long, default_value_t = 100)]
    nmax: usize,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    criteria: CriteriaArgs,
    /// Run directory; receives the manifest and all outputs.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Run directory written by `detect`.
    #[arg(long)]
    out: PathBuf,
    /// Trade inputs; must match the ones recorded by `detect`.
    #[arg(long, num_args = 1..)]
    trades: Vec<PathBuf>,
    #[command(flatten)]
    analysis: AnalysisArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory written by `run` or `detect`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    criteria: CriteriaArgs,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Run directory; receives the manifest and all outputs.
    #[arg(long)]
    out: PathBuf,
}

fn parse_duration(text: &str) -> Result<Nanos, String> {
    uee_core::detect::parse_duration(text).ok_or_else(|| format!("invalid duration {text:?}; use e.g. 1.5s or 2000ms"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("ueescan: error: cannot start worker pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let out = match &cli.command {
        Command::Synth(a) => a.out.clone(),
        Command::Detect(a) => a.out.clone(),
        Command::Analyze(a) => a.out.clone(),
        Command::Report(a) => a.out.clone(),
        Command::Run(a) => a.out.clone(),
    };
    match commands::dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            manifest::mark_failed(&out, &e);
            eprintln!("ueescan: error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
