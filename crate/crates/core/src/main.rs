use clap::Parser;

fn main() {
    let cli = kbl::cli::Cli::parse();
    std::process::exit(kbl::cli::run(cli));
}
