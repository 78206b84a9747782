use clap::Parser;

use additive_complexity::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
