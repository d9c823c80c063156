//! Command-line driver for the `pabcd` simulator: generate problems, run
//! experiments, compare the local and global stepsize rules, and verify the
//! descent monitors over batches of seeds.

pub mod args;
pub mod commands;
pub mod config;
mod error;
pub mod plot;
pub mod report;

use std::io::Write;

pub use args::{Cli, Command, Common, RuleArg};
pub use config::ExperimentConfig;
pub use error::CliError;

/// Runs one parsed command line and returns the process exit code.
pub fn main_with(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match commands::execute(&cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
