use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use zicount::cli::{self, exit_code, Cli};

fn main() -> ExitCode {
    let parsed = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let result = cli::run(parsed, &mut out);
    let _ = out.flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
