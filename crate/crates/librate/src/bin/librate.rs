use clap::Parser;
use librate::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
