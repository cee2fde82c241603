use std::process::ExitCode;

use clap::Parser;
use levsketch_cli::cli::Cli;
use levsketch_cli::run::execute;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // exit code 2 is reserved for exhausted retries
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("levsketch: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
