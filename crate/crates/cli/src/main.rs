//! `seqtreat`: simulate sequential-treatment scenarios, run replicate
//! studies and single analyses, and reproduce the acceptance checks.
//!
//! Exit codes: 0 success, 1 analysis or threshold failure, 2 invalid
//! configuration or usage.

mod analysis;
mod commands;
mod config;
mod error;
mod study;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{Parser, Subcommand};

use config::{Config, Overrides};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "seqtreat", version, about = "Tests and estimators for sequentially applied treatments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the root seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the output directory of the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_parser = clap::value_parser!(u16).range(1..))]
    jobs: Option<u16>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write one dataset per replicate, a schema sidecar and a manifest.
    Simulate,
    /// Run every `[[analysis]]` on every replicate and summarise.
    Study,
    /// Run a pinned acceptance scenario and print pass/fail.
    Reproduce {
        #[arg(value_parser = PossibleValuesParser::new(seqtreat::reproduce::valid_names()))]
        name: String,
    },
    /// Counterfactual survivor functions under `[g_formula]` regimes.
    GFormula,
    /// The `[g_estimate]` score-test inversion on one dataset.
    GEstimate,
    /// The `[direct_effect]` test or estimate on one dataset.
    DirectEffect,
}

fn load(cli: &Cli) -> CliResult<Config> {
    let path = cli.config.as_ref().ok_or_else(|| CliError::Config("this subcommand needs --config <FILE>".into()))?;
    let ov = Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
    };
    Config::load(path, &ov)
}

fn run(cli: &Cli) -> CliResult<String> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(usize::from(j))
            .build_global()
            .map_err(|e| CliError::Failed(format!("cannot start {j} worker threads: {e}")))?;
    }
    match &cli.command {
        Command::Reproduce { name } => commands::cmd_reproduce(name, cli.seed, cli.out.as_deref()),
        Command::Simulate => commands::cmd_simulate(&load(cli)?),
        Command::Study => study::cmd_study(&load(cli)?),
        Command::GFormula => commands::cmd_g_formula(&load(cli)?),
        Command::GEstimate => commands::cmd_g_estimate(&load(cli)?),
        Command::DirectEffect => commands::cmd_direct_effect(&load(cli)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
