use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = qanogan_cli::Cli::parse();
    match qanogan_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
