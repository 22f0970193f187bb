use std::process::ExitCode;

use clap::Parser;
use drift_ap::cli::{execute, Cli};

fn main() -> ExitCode {
    ExitCode::from(execute(&Cli::parse()))
}
