mod args;
mod commands;

use std::io::{IsTerminal, Write};
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::EXIT_VALIDATION;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .with_ansi(std::io::stderr().is_terminal())
        .init();
    let result = match cli.command {
        Command::Train(cmd) => commands::train(cmd),
        Command::Predict(cmd) => commands::predict(cmd),
        Command::Evaluate(cmd) => commands::evaluate(cmd),
        Command::Compare(cmd) => commands::compare(cmd),
        Command::Dataset(cmd) => commands::dataset(cmd),
        Command::Confounds(cmd) => commands::confounds(cmd),
        Command::Serve(cmd) => commands::serve(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let _ = std::io::stdout().flush();
            eprintln!("error: {err}");
            ExitCode::from(err.code)
        }
    }
}
