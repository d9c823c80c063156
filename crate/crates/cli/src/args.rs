use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pabcd", version, about = "Partially asynchronous block coordinate descent simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a problem document.
    Generate(Common),
    /// Run one experiment and write its trace and monitor report.
    Run(Common),
    /// Run the local and global rules on the same problem and schedule.
    Compare(Common),
    /// Run a batch of seeded experiments and aggregate the monitor verdicts.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Number of seeds, starting at the configured seed.
        #[arg(long)]
        seeds: Option<u64>,
    },
}

impl Command {
    pub fn common(&self) -> &Common {
        match self {
            Command::Generate(c) | Command::Run(c) | Command::Compare(c) => c,
            Command::Verify { common, .. } => common,
        }
    }
}

/// Flags shared by every subcommand. Each one overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Experiment config (TOML). Defaults to the 20-agent benchmark.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Seed for both the generator and the schedule.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    #[arg(long)]
    pub safety: Option<f64>,
    /// Plot f − min f on a logarithmic axis.
    #[arg(long)]
    pub log_y: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    Local,
    Global,
    Manual,
}
