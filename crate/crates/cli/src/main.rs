use std::process::ExitCode;

use clap::Parser;
use fracperim_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(raw) = std::env::var("FRACPERIM_THREADS") {
        match raw.trim().parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("error: FRACPERIM_THREADS={raw:?} is not a positive integer");
                return ExitCode::from(3);
            }
        }
    }
    match run(&cli) {
        Ok(outcome) => {
            for line in &outcome.messages {
                println!("{line}");
            }
            println!("{}: {}", outcome.command, if outcome.passed { "PASS" } else { "FAIL" });
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
