use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fhp_harness::{execute, load_config, Command, FlagOverrides};

/// Optimal HP-type filtering in Hilbert spaces: experiments and reports.
///
/// Exit codes: 0 success, 1 validation error, 2 warning escalated by
/// --strict, 3 I/O error.
#[derive(Debug, Parser)]
#[command(name = "fhp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,
    #[arg(long, global = true, value_name = "INT")]
    samples: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Treat admissibility and check warnings as errors (exit code 2).
    #[arg(long, global = true)]
    strict: bool,
    #[arg(long, global = true, value_name = "N")]
    scale_index: Option<u32>,
    /// Monte Carlo worker threads (0 = all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let flags = FlagOverrides {
        seed: cli.seed,
        samples: cli.samples,
        out: cli.out,
        strict: cli.strict,
        scale_index: cli.scale_index,
        workers: cli.workers,
    };
    let result = load_config(cli.config.as_deref(), std::env::vars(), &flags).and_then(|mut cfg| {
        cfg.bind_command(cli.command)?;
        execute(&cfg)
    });
    match result {
        Ok(manifest) => {
            println!(
                "{}: {} file(s) written, {} warning(s)",
                manifest.command,
                manifest.files.len() + 1,
                manifest.warnings.len()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
