use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cli = adds_cli::Cli::parse();
    match adds_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
