mod args;
mod commands;
mod config;
mod error;
mod manifest;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn run() -> Result<(), CliError> {
    let argv = config::expand(std::env::args_os().collect())?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => {
            let text = e.render().to_string();
            let text = text.strip_prefix("error: ").unwrap_or(&text);
            return Err(CliError::Input(text.trim_end().to_string()));
        }
    };
    let command = serde_json::to_value(&cli.command)?;
    match &cli.command {
        Command::Synth(a) => commands::synth(a, command),
        Command::Solve(a) => commands::solve(a, command),
        Command::Sweep(a) => commands::sweep(a, command),
        Command::Montecarlo(a) => commands::montecarlo(a, command),
        Command::Infer(a) => commands::infer(a, command),
        Command::Report(a) => commands::report(a),
    }
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
