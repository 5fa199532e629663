//! `mcptest` command-line entry point.
//!
//! Exit codes: 0 on success, 1 for invalid arguments or inputs, 2 for
//! failures during computation or output.

mod args;
mod commands;
mod config;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{CommandFactory, FromArgMatches};
use mcptest_core::Error;

use args::{Cli, Command};
use commands::Session;

/// An error caused by the invocation rather than the computation.
#[derive(Debug)]
pub struct Usage(pub String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<Usage>().is_some() {
        return 1;
    }
    match err.downcast_ref::<Error>() {
        Some(Error::Io(_) | Error::NonConvergence { .. } | Error::Json(_)) => 2,
        Some(_) => 1,
        None => 2,
    }
}

fn parse(argv: Vec<OsString>) -> Result<Cli, ExitCode> {
    let cmd = Cli::command();
    let argv = match config::config_path(&argv) {
        None => argv,
        Some(path) => {
            let merged = std::fs::read_to_string(&path)
                .map_err(anyhow::Error::from)
                .and_then(|text| config::merge(&cmd, argv, &text));
            match merged {
                Ok(a) => a,
                Err(e) => {
                    eprintln!("mcptest: config {}: {e:#}", path.to_string_lossy());
                    return Err(ExitCode::from(1));
                }
            }
        }
    };
    let matches = cmd.try_get_matches_from(argv).map_err(|e| {
        let _ = e.print();
        ExitCode::from(if e.use_stderr() { 1 } else { 0 })
    })?;
    Cli::from_arg_matches(&matches).map_err(|e| {
        let _ = e.print();
        ExitCode::from(1)
    })
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(Usage("--threads must be at least 1".into()).into());
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    }
    let session = Session { quiet: cli.quiet };
    match &cli.command {
        Command::Score(a) => commands::score(&session, a),
        Command::Fit(a) => commands::fit(&session, a),
        Command::Simulate(a) => commands::simulate(&session, a),
        Command::Test(a) => commands::test(&session, a),
        Command::Subsample(a) => commands::subsample(&session, a),
        Command::Truth(a) => commands::truth(&session, a),
    }
}

fn main() -> ExitCode {
    let cli = match parse(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(code) => return code,
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("mcptest: error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
