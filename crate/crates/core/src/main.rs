use clap::Parser;

fn main() {
    std::process::exit(kesten_evt::cli::run(kesten_evt::cli::Cli::parse()));
}
