use clap::Parser;

fn main() {
    let cli = qfock_cli::Cli::parse();
    std::process::exit(qfock_cli::run(&cli));
}
