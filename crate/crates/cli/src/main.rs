use std::process::ExitCode;

use clap::Parser;

use ambpol_cli::{run, Cli, EXIT_FLAGGED};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(o) if o.flags.is_empty() => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(EXIT_FLAGGED as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
