//! Command-line experiments: loss evaluation, gradient checks, CT
//! simulation, FBP/ART reconstruction, filter training, and the cutoff
//! sweep.

pub mod commands;
pub mod experiment;

use std::fmt;

use clap::Parser;

pub use commands::Cli;

/// An invalid flag value detected after parsing; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Caps rayon's global pool from `EAGLE_THREADS` (unset or 0 means auto).
pub fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("EAGLE_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .map_err(|_| UsageError(format!("EAGLE_THREADS must be a nonnegative integer, got '{value}'")))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| anyhow::anyhow!("cannot configure thread pool: {e}"))?;
    }
    Ok(())
}

/// Parses arguments, runs the subcommand, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let result = configure_threads().and_then(|_| cli.run());
    match result {
        Ok(code) => code,
        Err(e) => {
            let line = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {line}");
            if e.is::<UsageError>() {
                2
            } else {
                1
            }
        }
    }
}
