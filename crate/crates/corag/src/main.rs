use clap::Parser;

fn main() {
    let cli = corag::cli::Cli::parse();
    if let Err(e) = corag::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
