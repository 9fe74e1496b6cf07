use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Command, Options, EXIT_CONFIG, EXIT_OK};
use crate::pool;

/// Time-periodic doubly nonlinear parabolic solver.
#[derive(Debug, Parser)]
#[command(name = "dnp", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Run the cascade and write the trajectory.
    Solve(Common),
    /// Solve, then run the invariant suite, convex identities, growth audit and negative control.
    Verify(Common),
    /// Manufactured-solution study from the `mms` block.
    Mms(Common),
    /// Stability table for the `mosco` block.
    Mosco(Common),
    /// Solve over the `(p, m, ε_final)` grid of the `sweep` block.
    Sweep(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Worker threads for independent solves.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let (cmd, c) = match cli.command {
        Sub::Solve(c) => (Command::Solve, c),
        Sub::Verify(c) => (Command::Verify, c),
        Sub::Mms(c) => (Command::Mms, c),
        Sub::Mosco(c) => (Command::Mosco, c),
        Sub::Sweep(c) => (Command::Sweep, c),
    };
    let opts = Options {
        config: c.config,
        output: c.output,
        jobs: c.jobs.unwrap_or_else(pool::default_jobs).max(1),
        quiet: c.quiet,
    };
    commands::run(cmd, &opts)
}
