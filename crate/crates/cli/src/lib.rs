//! Batch runner behind the `stepseq` binary.
//!
//! Every subcommand reads line-delimited inputs, writes its outputs into one directory and
//! leaves a `metadata.json` next to them recording the parameters, the seed and a timestamp.
//! Apart from that timestamp, reruns with the same inputs and seed are byte-identical whatever
//! the thread count.

pub mod commands;
pub mod config;
mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::CliError;
use output::Context;

/// Name of the optional environment variable supplying `--out`.
pub const OUTPUT_DIR_ENV: &str = "STEPSEQ_OUTPUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "stepseq",
    version,
    about = "Evaluate, decode and annotate scrambled instruction steps"
)]
pub struct Cli {
    /// TOML file of run parameters; its values take precedence over flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,

    /// Directory receiving the command's outputs.
    #[arg(long, global = true, env = OUTPUT_DIR_ENV)]
    pub out: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scramble manuals into evaluation instances and their references.
    Scramble(commands::scramble::Args),
    /// Noisy pairwise matrices around each reference order.
    Simulate(commands::simulate::Args),
    /// Global orders from pairwise matrices.
    Decode(commands::decode::Args),
    /// Score predictions against references.
    Evaluate(commands::evaluate::Args),
    /// Inter-annotator agreement, worker filtering and majority-voted references.
    Iaa(commands::iaa::Args),
    /// Category-disjoint train/dev/test split of a manifest.
    Split(commands::split::Args),
    /// Pretraining corruption plans.
    Plan(commands::plan::Args),
    /// MRR, Top-1 and MRSR from manual-completion results.
    CompleteEval(commands::complete::Args),
    /// Merge aggregate tables from several evaluation runs.
    Report(commands::report::Args),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Scramble(_) => "scramble",
            Command::Simulate(_) => "simulate",
            Command::Decode(_) => "decode",
            Command::Evaluate(_) => "evaluate",
            Command::Iaa(_) => "iaa",
            Command::Split(_) => "split",
            Command::Plan(_) => "plan",
            Command::CompleteEval(_) => "complete-eval",
            Command::Report(_) => "report",
        }
    }
}

pub fn run(mut cli: Cli) -> Result<(), CliError> {
    if let Some(path) = cli.config.clone() {
        config::ConfigFile::load(&path)?.apply(&mut cli);
    }
    let out = cli
        .out
        .clone()
        .ok_or_else(|| CliError::Config(format!("no output directory: pass --out or set {OUTPUT_DIR_ENV}")))?;
    let ctx = Context::new(out, cli.jobs, cli.command.name())?;
    match &cli.command {
        Command::Scramble(a) => commands::scramble::run(&ctx, a),
        Command::Simulate(a) => commands::simulate::run(&ctx, a),
        Command::Decode(a) => commands::decode::run(&ctx, a),
        Command::Evaluate(a) => commands::evaluate::run(&ctx, a),
        Command::Iaa(a) => commands::iaa::run(&ctx, a),
        Command::Split(a) => commands::split::run(&ctx, a),
        Command::Plan(a) => commands::plan::run(&ctx, a),
        Command::CompleteEval(a) => commands::complete::run(&ctx, a),
        Command::Report(a) => commands::report::run(&ctx, a),
    }
}
