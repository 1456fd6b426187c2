use clap::Parser;

mod commands;

fn main() {
    let cli = commands::Cli::parse();
    std::process::exit(commands::run(cli));
}
