//! `debias-kit`: debias word embeddings, audit them, and train
//! fairness-constrained toxicity classifiers.

mod embed;
mod fair;
mod io;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use debias_core::embedding::Format;

use crate::manifest::Recorder;

#[derive(Parser)]
#[command(name = "debias-kit", version, about)]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Only log errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Hard-debias an embedding file.
    Debias(embed::DebiasArgs),
    /// Per-identity MAC of several stores, t-tested against a baseline.
    Audit(embed::AuditArgs),
    /// Train a logistic classifier under FNR/FPR deviation constraints.
    TrainFair(fair::TrainArgs),
    /// Generate a synthetic identity-annotated dataset.
    GenData(fair::GenArgs),
    /// Export bias subspaces and their principal angles.
    InspectSubspace(embed::InspectArgs),
    /// Rank analogy pairs from a candidate pool.
    Analogies(embed::AnalogyArgs),
    /// Re-run a command from its manifest and verify the outputs.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum FormatArg {
    Text,
    Binary,
}

impl FormatArg {
    pub fn resolve(arg: Option<FormatArg>, path: &std::path::Path) -> Format {
        match arg {
            Some(FormatArg::Text) => Format::Text,
            Some(FormatArg::Binary) => Format::Binary,
            None => Format::from_path(path),
        }
    }
}

fn init_logging(cli: &Cli) {
    let level = if cli.quiet {
        "error"
    } else {
        match cli.verbose {
            0 => "warn",
            1 => "info",
            _ => "debug",
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("DEBIAS_KIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .with_context(|| format!("DEBIAS_KIT_THREADS must be a non-negative integer, got {raw:?}"))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    init_threads()?;
    let args: Vec<String> = std::env::args().skip(1).collect();
    match cli.command {
        Command::Replay(r) => manifest::replay(&r.manifest),
        Command::Debias(a) => embed::debias(a, Recorder::new("debias", args)),
        Command::Audit(a) => embed::audit(a, Recorder::new("audit", args)),
        Command::TrainFair(a) => fair::train(a, Recorder::new("train-fair", args)),
        Command::GenData(a) => fair::gen_data(a, Recorder::new("gen-data", args)),
        Command::InspectSubspace(a) => embed::inspect(a, Recorder::new("inspect-subspace", args)),
        Command::Analogies(a) => embed::analogies(a, Recorder::new("analogies", args)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
