//! `subtab` — reproducible table-reasoning runs from the command line.

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::FileConfig;

#[derive(Parser)]
#[command(
    name = "subtab",
    version,
    about = "SQL-driven sub-table extraction and answering for table QA and fact verification"
)]
struct Cli {
    /// TOML config file; explicit flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize dates and numbers in a dataset's tables.
    Preprocess(commands::PreprocessArgs),
    /// Run the two-stage pipeline over a dataset.
    Run(commands::RunArgs),
    /// Score pipeline outputs against a dataset.
    Eval(commands::EvalArgs),
    /// Reduction statistics and direct-answer rate for pipeline outputs.
    Stats(commands::StatsArgs),
    /// Token-cutoff class distribution, optionally joined with accuracy.
    Cutoff(commands::CutoffArgs),
    /// Inspect a completion cache file.
    Cache(commands::CacheArgs),
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let file_cfg = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Preprocess(args) => commands::preprocess(args, file_cfg),
        Command::Run(args) => commands::run(args, file_cfg),
        Command::Eval(args) => commands::eval(args, file_cfg),
        Command::Stats(args) => commands::stats(args, file_cfg),
        Command::Cutoff(args) => commands::cutoff(args, file_cfg),
        Command::Cache(args) => commands::cache(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let first_line = e.to_string().lines().next().unwrap_or("bad usage").to_string();
            eprintln!("error: {}", first_line.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
        Err(e) => {
            // --help / --version
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
