use clap::Parser;

fn main() {
    let cli = disac_cli::args::Cli::parse();
    std::process::exit(disac_cli::run(cli));
}
