mod args;
mod crossval;
mod data;
mod evaluate;
mod inspect;
mod prepare;
mod train;

use std::process::ExitCode;

use clap::FromArgMatches;
use dtagn_core::Error;

use args::{Cli, Command, Inspect, Prepare};

fn run(cli: &Cli) -> dtagn_core::Result<()> {
    match &cli.command {
        Command::Prepare(Prepare::Geometry(a)) => prepare::geometry(a),
        Command::Prepare(Prepare::Appearance(a)) => prepare::appearance(a),
        Command::Train(a) => train::run(a),
        Command::Eval(a) => evaluate::eval(a),
        Command::Fuse(a) => evaluate::fuse_cmd(a),
        Command::Crossval(a) => crossval::run(a),
        Command::Inspect(Inspect::Filters(a)) => inspect::filters(a),
        Command::Inspect(Inspect::Maps(a)) => inspect::maps(a),
        Command::Inspect(Inspect::Landmarks(a)) => inspect::landmarks(a),
        Command::Inspect(Inspect::Activations(a)) => inspect::activations(a),
    }
}

/// 1 for rejected input, 2 for I/O failures.
fn failure(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_io() { 2 } else { 1 })
}

fn main() -> ExitCode {
    let argv = match args::expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => return failure(&e),
    };
    let cli = match args::command()
        .try_get_matches_from(argv)
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => failure(&e),
    }
}
