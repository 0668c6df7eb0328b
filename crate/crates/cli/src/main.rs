mod args;
mod commands;
mod io;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use io::{ExitKind, Failure, Reporter};

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::internal(format!("cannot start worker pool: {e}")))?;
    }
    let reporter = Reporter::new(cli.strict);
    let result = match &cli.command {
        Command::Guide(a) => commands::guide::run(a, &reporter),
        Command::Refine(a) => commands::refine::run(a, &reporter),
        Command::Eval(a) => commands::eval::run(a, &reporter),
        Command::Stats(a) => commands::stats::run(a, &reporter),
        Command::Synth(a) => commands::synth::run(a),
        Command::WarpDemo(a) => commands::warp_demo::run(a),
    };
    if reporter.count() > 0 {
        eprintln!("{} warning(s)", reporter.count());
    }
    result
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(ExitKind::Usage as u8),
            };
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let label = match f.kind {
                ExitKind::Usage => "usage error",
                ExitKind::Data => "data error",
                ExitKind::Internal => "internal error",
            };
            eprintln!("{label}: {:#}", f.error);
            ExitCode::from(f.kind as u8)
        }
    }
}
