use std::process::ExitCode;

use clap::Parser;
use ldme_harness::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ldme: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
