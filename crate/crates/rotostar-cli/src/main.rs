//! `rotostar` — scenario-driven pipeline over the rotostar library: build
//! polytropic equilibria, assemble the oscillation operators, compute spectra,
//! integrate perturbations, and evaluate the stability seminorms.
//!
//! Exit codes: 0 success, 2 config error, 3 numerical-task failure, 4 i/o
//! failure.  Set `ROTOSTAR_LOG=info` (or `debug`) for progress logging.

mod config;
mod error;
mod inspect;
mod manifest;
mod pipeline;

use clap::{Parser, Subcommand};
use error::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "rotostar", version, about = "rotating polytrope oscillation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario described by a JSON config
    Run {
        /// path to the scenario config (JSON)
        config: PathBuf,
        /// artifact directory (overrides the config's output_dir)
        #[arg(long)]
        out: Option<PathBuf>,
        /// seed for randomized test fields (overrides the config's seed)
        #[arg(long)]
        seed: Option<u64>,
        /// worker threads for independent sectors
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Re-verify a stored model directory
    Check {
        /// model directory written by a run
        model_dir: PathBuf,
    },
    /// Summarize a run's artifact directory and emit plot-ready series
    Report {
        /// artifact directory written by `rotostar run`
        artifact_dir: PathBuf,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            jobs,
        } => {
            let cfg = config::load(&config).map_err(CliError::Config)?;
            let out_dir = out
                .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
                .ok_or_else(|| {
                    CliError::Config("no output directory: set output_dir or pass --out".into())
                })?;
            let seed = seed.unwrap_or(cfg.seed);
            let jobs = jobs.max(1);
            let dir = pipeline::run_pipeline(&cfg, &out_dir, seed, jobs)?;
            println!("artifacts written to {}", dir.display());
            Ok(())
        }
        Command::Check { model_dir } => {
            let (text, pass) = inspect::check_model(&model_dir)?;
            print!("{text}");
            if pass {
                Ok(())
            } else {
                Err(CliError::Task("model checks failed".into()))
            }
        }
        Command::Report { artifact_dir } => {
            let (text, _ok) = inspect::emit_report(&artifact_dir)?;
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("ROTOSTAR_LOG"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
