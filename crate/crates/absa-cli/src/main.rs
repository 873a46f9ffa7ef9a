//! Pipeline driver: one subcommand per stage, composing
//! ingest -> annotate -> vote -> evaluate / regress over flat files in a run
//! directory.

mod config;
mod manifest;
mod stages;

use clap::{Parser, Subcommand};
use config::{Overrides, RunConfig};
use stages::{CliError, CliResult};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "absa",
    about = "Aspect-based sentiment annotation pipeline with seed-ensemble majority voting",
    version
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override the configured output directory.
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,

    /// Review-level parallelism for annotate.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Override the backend endpoint URL (also: ABSA_BACKEND_URL).
    #[arg(long, global = true, value_name = "URL")]
    backend_url: Option<String>,

    /// Override the sampling seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Skip reviews already annotated in the output directory (default).
    #[arg(long, global = true, overrides_with = "no_resume")]
    resume: bool,

    /// Reprocess everything, discarding existing annotate outputs.
    #[arg(long, global = true, overrides_with = "resume")]
    no_resume: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, filter, and sample the review corpus; write summary statistics.
    Ingest,
    /// Annotate sampled reviews with the seed-ensemble workers.
    Annotate,
    /// Aggregate worker annotations with the two-stage median vote.
    Vote,
    /// Score voted and per-seed annotations against ground truth.
    Evaluate,
    /// Fit and compare the two rating regressions.
    Regress,
    /// Render all artifacts into one summary.
    Report,
}

fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let Some(path) = &cli.config else {
        return Err(CliError::usage(anyhow::anyhow!(
            "--config <FILE> is required"
        )));
    };
    let overrides = Overrides {
        output_dir: cli.output_dir.clone(),
        jobs: cli.jobs,
        backend_url: cli.backend_url.clone(),
        sample_seed: cli.seed,
        resume: match (cli.resume, cli.no_resume) {
            (_, true) => Some(false),
            (true, _) => Some(true),
            _ => None,
        },
    };
    RunConfig::load(path, &overrides).map_err(CliError::usage)
}

fn run(cli: &Cli) -> CliResult<()> {
    let config = load_config(cli)?;
    match cli.command {
        Command::Ingest => stages::ingest::run(&config),
        Command::Annotate => stages::annotate::run(&config),
        Command::Vote => stages::vote::run(&config),
        Command::Evaluate => stages::evaluate::run(&config),
        Command::Regress => stages::regress::run(&config),
        Command::Report => stages::report::run(&config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
