use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context as _;
use clap::{Parser, Subcommand};
use cryptofactor::config::RunConfig;
use cryptofactor::error::{exit, Error};
use cryptofactor::{pipeline, validation};

#[derive(Parser, Debug)]
#[command(
    name = "cryptofactor",
    version,
    about = "TVL factor-pricing research engine"
)]
struct Cli {
    /// Run configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Worker threads for the analysis grid.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Seed for `synth`, overriding `synth.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, short, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fetch raw histories into the cache.
    Ingest,
    /// Write a synthetic cache with known ground truth.
    Synth,
    /// Run the full grid and write artifacts.
    Analyze,
    /// Re-render text tables from a finished run's structured tables.
    Report,
    /// Run the invariant and Monte Carlo acceptance suite.
    Validate {
        /// Shrink Monte Carlo trial counts by this factor.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    match &cli.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

fn output_dir(cli: &Cli, cfg: &RunConfig) -> PathBuf {
    cli.output.clone().unwrap_or_else(|| cfg.output.dir.clone())
}

/// Exit status for a failure, from the typed error when there is one.
fn status_of(err: &anyhow::Error) -> u8 {
    let code = err
        .chain()
        .find_map(|e| e.downcast_ref::<Error>())
        .map_or(exit::DATA, Error::exit_code);
    code as u8
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Ingest => {
            let n = pipeline::run_ingest(&cfg)?;
            println!("{n} records -> {}", cfg.data.cache.display());
        }
        Command::Synth => {
            let seed = cli.seed.unwrap_or(cfg.synth.seed);
            let n = pipeline::run_synth(&cfg, seed, &cfg.data.cache)?;
            println!(
                "{n} synthetic records (seed {seed}) -> {}",
                cfg.data.cache.display()
            );
        }
        Command::Analyze => {
            let out = output_dir(cli, &cfg);
            let summary = pipeline::run_analysis(&cfg, &out, cli.jobs.max(1))?;
            print!("{summary}");
            println!("artifacts -> {}", out.display());
        }
        Command::Report => {
            let out = output_dir(cli, &cfg);
            for path in pipeline::rerender_tables(&out)? {
                println!("{}", path.display());
            }
        }
        Command::Validate { scale } => {
            if !(*scale > 0.0 && *scale <= 1.0) {
                return Err(
                    Error::Config(format!("--scale must be in (0, 1], got {scale}")).into(),
                );
            }
            let work = tempfile::tempdir().context("creating validation workdir")?;
            let outcomes = validation::run_suite(work.path(), *scale);
            for o in &outcomes {
                println!("{o}");
            }
            if outcomes.iter().any(|o| !o.passed) {
                return Ok(exit::FAILURE as u8);
            }
        }
    }
    Ok(exit::OK as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            match err.downcast_ref::<Error>() {
                Some(typed) => eprintln!("error: {typed}"),
                None => eprintln!("error: {err:#}"),
            }
            ExitCode::from(status_of(&err))
        }
    }
}
