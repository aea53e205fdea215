use std::process::ExitCode;

use clap::Parser;
use leo_irs::cli::{run, Cli};

fn main() -> ExitCode {
    run(Cli::parse())
}
