use std::io::{self, Write};
use std::process::ExitCode;

use clap::Parser;
use treeharm_cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            if let Some(text) = outcome.stdout {
                // A closed pipe (e.g. `| head`) is not a failure.
                let _ = writeln!(io::stdout().lock(), "{text}");
            }
            for f in &outcome.failures {
                eprintln!("check failed: {f}");
            }
            if outcome.failures.is_empty() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
