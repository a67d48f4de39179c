use clap::Parser;

fn main() {
    swingcert_cli::init_threads();
    let cli = swingcert_cli::Cli::parse();
    std::process::exit(swingcert_cli::run(cli));
}
