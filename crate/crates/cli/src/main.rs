use std::path::PathBuf;

use clap::Parser;
use tbscatter_cli::{Command, Format, Invocation};

/// Tight-binding scattering: sweeps, poles, trajectories and validation.
#[derive(Debug, Parser)]
#[command(name = "tbscatter", version, about)]
struct Args {
    /// What to compute.
    #[arg(value_enum)]
    command: Command,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output file; stdout when absent (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format (overrides `format` in the config).
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn main() {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let inv = Invocation { command: args.command, out: args.out, format: args.format };
    std::process::exit(tbscatter_cli::run(&args.config, &inv));
}
