use std::process::ExitCode;

use clap::Parser;
use mudp_cli::Cli;

fn main() -> ExitCode {
    ExitCode::from(mudp_cli::run(&Cli::parse()))
}
