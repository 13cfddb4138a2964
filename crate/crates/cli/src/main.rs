use std::process::ExitCode;

use clap::Parser;

use kneeseg_cli::{Cli, UsageError};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match kneeseg_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
