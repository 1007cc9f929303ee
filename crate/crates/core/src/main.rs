use clap::Parser;

fn main() {
    let cli = fgp_core::cli::Cli::parse();
    std::process::exit(fgp_core::cli::run(cli));
}
