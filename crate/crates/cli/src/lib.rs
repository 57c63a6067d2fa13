//! `molcomm` command-line front end.
//!
//! Every run resolves a config (defaults, then the `--config` file, then
//! flags), executes one subcommand and writes a self-describing CSV or JSON
//! table. Exit codes: 0 success, 1 I/O failure, 2 config or usage error,
//! 3 validation failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use molcomm::VarianceMode;

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use config::{ExperimentConfig, Format};
pub use error::CliError;

/// Exit code for a validation run with at least one failing check.
pub const EXIT_VALIDATION_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "molcomm", version, about = "Two-node bacterial molecular communication link analyses")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file: `key = value` lines, a JSON object, or a previous output file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Receiver variance interpretation.
    #[arg(long, global = true, value_name = "consistent|paper-literal")]
    mode: Option<VarianceMode>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Monte Carlo trials per validation point.
    #[arg(long, global = true)]
    trials: Option<u64>,

    /// Output file (default: standard output).
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_name = "csv|json")]
    format: Option<Format>,

    /// Worker threads; 0 or unset uses every core. Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Monte Carlo check of the analytic moments over `p0_grid`.
    Validate,
    /// Capacity over `bacteria_list` x `p_max_grid`.
    CapacitySweep,
    /// Rate and error probabilities over `m_list` x `p_max_grid`.
    ModulationSweep,
    /// Smallest `p_max` meeting `target_error`, per bacteria count and symbol count.
    Feasibility,
    /// Analytic moments at a single `p0`.
    Moments,
}

/// Parses `argv` (program name first), runs it and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Applies command-line overrides on top of the config file.
fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|source| CliError::Read {
                path: path.display().to_string(),
                source,
            })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(mode) = cli.mode {
        config.mode = mode;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(trials) = cli.trials {
        config.trials = trials;
    }
    if let Some(format) = cli.format {
        config.format = format;
    }
    if let Some(out) = &cli.out {
        config.out = Some(out.display().to_string());
    }
    config.resolve()
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let config = resolve_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker threads: {e}")))?;
    let outcome = pool.install(|| match cli.command {
        Command::Validate => commands::validate(&config),
        Command::CapacitySweep => commands::capacity_table(&config),
        Command::ModulationSweep => commands::modulation_table(&config),
        Command::Feasibility => commands::feasibility(&config),
        Command::Moments => commands::moments(&config),
    })?;
    let bytes = output::render(&outcome.table, &config)?;
    match &config.out {
        Some(path) => fs::write(path, &bytes)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(&bytes)?;
            stdout.flush()?;
        }
    }
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    Ok(if outcome.failed { EXIT_VALIDATION_FAILED } else { 0 })
}
