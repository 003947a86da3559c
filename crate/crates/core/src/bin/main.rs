use clap::Parser;

fn main() {
    let cli = digisem::cli::Cli::parse();
    if let Err(e) = digisem::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
