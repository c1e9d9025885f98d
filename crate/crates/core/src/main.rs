use clap::Parser;

fn main() {
    let cli = graphdr::cli::Cli::parse();
    if let Err(e) = graphdr::cli::run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
