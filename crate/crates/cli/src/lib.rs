//! Command-line front end and simulation-study harness for `mce-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod model_file;

use std::ffi::OsString;
use std::io::Write as _;

use clap::Parser;

pub use commands::Cli;
pub use config::{ExperimentConfig, ExperimentKind};
pub use error::{CliError, Result};

/// Parses `args`, runs the command and returns the process exit code:
/// 0 on success, 1 for usage errors, 2 for domain and i/o errors.
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
    match commands::execute(cli) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {e}");
                    2
                }
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
