//! Command-line front end for `tbscatter`: geometry configs in TOML,
//! conductance sweeps, pole tables, pole trajectories and validation
//! reports, written as deterministic CSV or JSON.

use std::path::PathBuf;

pub mod commands;
pub mod config;
pub mod table;
pub mod validate;

pub use config::{Format, RunConfig};
pub use table::Table;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "TBSCATTER_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] tbscatter::Error),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 1 usage/config, 2 numerical, 3 validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Validation(_) => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Sweep,
    Poles,
    Track,
    Validate,
}

/// Everything a run needs besides the config file contents.
#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Runs one command and returns the rendered output, plus an error when
/// validation failed (the report is still produced in that case).
pub fn execute(cfg: &RunConfig, command: Command, format: Format) -> Result<(String, Option<CliError>), CliError> {
    let (table, failure) = match command {
        Command::Sweep => (commands::sweep(cfg)?, None),
        Command::Poles => (commands::poles(cfg)?, None),
        Command::Track => (commands::track(cfg)?, None),
        Command::Validate => {
            let (t, failed) = validate::validate(cfg)?;
            let err = failed.then(|| {
                let names: Vec<&str> = t
                    .rows
                    .iter()
                    .filter(|r| matches!(&r[4], table::Cell::Text(s) if s == "fail"))
                    .filter_map(|r| match &r[0] {
                        table::Cell::Text(s) => Some(s.as_str()),
                        _ => None,
                    })
                    .collect();
                CliError::Validation(names.join(", "))
            });
            (t, err)
        }
    };
    Ok((table.render(cfg, format), failure))
}

/// Config loading, thread setup, execution and output. Returns the exit code.
pub fn run(config: &std::path::Path, inv: &Invocation) -> i32 {
    match run_inner(config, inv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("tbscatter: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{THREADS_ENV}: expected a thread count, got {raw:?}")))?;
    // A pool that is already set up (repeated calls in one process) is fine.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn run_inner(config: &std::path::Path, inv: &Invocation) -> Result<(), CliError> {
    configure_threads()?;
    let cfg = RunConfig::load(config)?;
    let format = inv.format.or(cfg.format).unwrap_or_default();
    let (text, failure) = execute(&cfg, inv.command, format)?;
    match inv.out.as_ref().or(cfg.output.as_ref()) {
        Some(path) => table::write_atomic(path, &text)?,
        None => print!("{text}"),
    }
    failure.map_or(Ok(()), Err)
}
