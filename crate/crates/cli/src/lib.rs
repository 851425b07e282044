//! Command-line front end: initial-data parsing, run orchestration and
//! deterministic CSV/JSON export.

pub mod args;
pub mod commands;
pub mod converge;
pub mod expr;
pub mod input;
pub mod output;

pub use args::{Cli, Command};
pub use commands::Failure;

/// Dispatches a parsed command line and returns the process exit status.
pub fn run(cli: &Cli) -> u8 {
    let result = match &cli.command {
        Command::Solve(a) => commands::run_solve(a),
        Command::Geodesic(a) => commands::run_geodesic(a),
        Command::Expmap(a) => commands::run_expmap(a),
        Command::Validate(a) => commands::run_validate(a),
        Command::Converge(a) => commands::run_converge(a),
    };
    match result {
        Ok(code) => code,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            code
        }
    }
}
