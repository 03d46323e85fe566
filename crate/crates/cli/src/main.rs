//! `robust-ot`: robust distances, certificates, radius selection, privacy
//! calibration and experiments from the command line.

mod args;
mod commands;

use std::io::Write;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use commands::CliError;

fn report(err: &CliError, json: bool) {
    let code = err.exit_code();
    let mut stderr = std::io::stderr().lock();
    if json {
        let obj = serde_json::json!({ "error": err.kind(), "message": err.to_string(), "exitCode": code });
        let _ = writeln!(stderr, "{obj}");
    } else {
        let _ = writeln!(stderr, "robust-ot: {err}");
    }
}

fn run(cli: &Cli) -> Result<(String, bool), CliError> {
    let threads = match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    Ok(match &cli.command {
        Command::Compute(a) => (commands::compute(a)?, true),
        Command::Dual(a) => (commands::dual(a)?, true),
        Command::Elbow(a) => (commands::elbow(a, threads)?, true),
        Command::Privacy(a) => (commands::privacy(a)?, true),
        Command::Experiment(a) => commands::experiment(a, threads)?,
        Command::Convert(a) => (commands::convert(a)?, true),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            // the flag itself may be what failed to parse, so look for it by hand
            let json = std::env::args().any(|a| a == "--json-errors");
            if json {
                report(&CliError::Usage(e.kind().to_string()), true);
            } else {
                let _ = e.print();
            }
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok((out, passed)) => {
            let mut stdout = std::io::stdout().lock();
            let _ = stdout.write_all(out.as_bytes());
            let _ = stdout.write_all(b"\n");
            if passed {
                ExitCode::SUCCESS
            } else {
                report(&CliError::AssertionsFailed("experiment assertions failed".into()), cli.json_errors);
                ExitCode::from(1)
            }
        }
        Err(e) => {
            report(&e, cli.json_errors);
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
