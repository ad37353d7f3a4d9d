//! Command-line front end: deterministic experiment runner over the
//! workbench with machine-readable outputs (CSV for series, JSON lines for
//! diagnostics). Exit codes: 0 success, 1 check failure, 2 usage or input
//! error.

mod commands;

use clap::Parser;

fn main() {
    let cli = commands::Cli::parse();
    std::process::exit(commands::run(cli));
}
