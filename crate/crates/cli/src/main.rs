//! `prodtraj`: the trajectory analysis pipeline from the command line.
//!
//! ```text
//! prodtraj simulate --n-faculty 200 --seed 1 --out-dir run
//! prodtraj fit --faculty run/faculty.jsonl --pubs run/publications.jsonl --out-dir run
//! prodtraj classify --fits run/fits.csv --truth run/truth.csv --out-dir run
//! prodtraj report --in-dir run
//! ```
//!
//! Exit status is 0 on success, 1 for usage errors and 2 for data errors.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod config;
mod error;
mod output;
mod report;

use std::process::ExitCode;

use clap::Parser;

use crate::args::Cli;
use crate::error::CliError;

fn run(argv: Vec<std::ffi::OsString>) -> Result<(), CliError> {
    let argv = config::expand(argv)?;
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return if code == 0 { Ok(()) } else { Err(CliError::Usage(String::new())) };
        }
    };
    if let Some(n) = cli.command.common().threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    commands::run(&cli.command)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string();
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
