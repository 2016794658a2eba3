use clap::Parser;

fn main() {
    let cli = gravicav::cli::Cli::parse();
    std::process::exit(gravicav::cli::execute(cli));
}
