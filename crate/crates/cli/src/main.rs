mod args;
mod commands;
mod config;
mod output;
mod report;

use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::commands::Ctx;
use crate::config::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hprobe: {e}");
            ExitCode::from(match e {
                CliError::Usage(_) => 1,
                CliError::Failed(_) => 2,
            })
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let ctx = Ctx::resolve(&cli.global)?;
    eprintln!("hprobe: seed {}", ctx.seed);
    let summary = commands::run(&cli.command, &ctx)?;
    let mut out = io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(&summary)?) {
        // A closed pipe (`| head`) is not a failure of the run.
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}
