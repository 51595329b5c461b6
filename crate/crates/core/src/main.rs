use clap::Parser;
use nmcom::cli::{main_with, Cli};

fn main() -> std::process::ExitCode {
    main_with(&Cli::parse())
}
