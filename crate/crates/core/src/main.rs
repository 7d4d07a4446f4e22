use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = snapcheck::cli::Cli::parse();
    ExitCode::from(snapcheck::cli::run(cli))
}
