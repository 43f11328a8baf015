//! Command-line front end for `kdx-core`.
//!
//! Data goes in and out as CSV (header row, `x1..xd` features and an
//! optional `y` or `label` column), fitted models as JSON and figures as
//! SVG. [`run`] is the whole program; the binary only forwards its exit
//! code.

pub mod fmt;
pub mod model;
pub mod svg;
pub mod table;

mod args;
mod commands;

use std::ffi::OsString;

use clap::Parser;

pub use args::Cli;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Compute(#[from] kdx_core::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    /// 1 for usage and I/O problems, 2 for failed computations.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => 1,
            CliError::Compute(_) => 2,
        }
    }
}

/// Environment variable read when `--threads` is absent.
pub const THREADS_ENV: &str = "KDX_THREADS";

fn configure_threads(flag: Option<usize>) -> Result<(), CliError> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(v.trim().parse().map_err(|_| CliError::Usage(format!("{THREADS_ENV}: `{v}` is not a thread count")))?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Usage("thread count must be at least 1".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match configure_threads(cli.threads).and_then(|()| commands::dispatch(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
