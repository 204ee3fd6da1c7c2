mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use commands::UsageError;

const EXIT_USAGE: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

fn cap_threads() -> Result<(), UsageError> {
    let Ok(value) = std::env::var("LPL_THREADS") else {
        return Ok(());
    };
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            lpl_core::par::init_global_threads(n);
            Ok(())
        }
        _ => Err(UsageError(format!(
            "LPL_THREADS must be a positive integer, got {value:?}"
        ))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = cap_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
