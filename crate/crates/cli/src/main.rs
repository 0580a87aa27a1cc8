use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = banditforest_cli::Cli::parse();
    match banditforest_cli::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
