use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use thermoloss::cli::{envelope_json, run, threads_from_env, Cli, THREADS_ENV};
use thermoloss::error::CliError;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    let env = std::env::var(THREADS_ENV).ok();
    let threads = threads_from_env(env.as_deref())?;
    let outcome = run(cli.command)?;
    let text = envelope_json(&outcome, threads);
    match &cli.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e))?,
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::io(std::path::Path::new("<stdout>"), e))?,
    }
    if outcome.exit_code != 0 {
        eprintln!("error: solver did not converge");
    }
    Ok(outcome.exit_code)
}
