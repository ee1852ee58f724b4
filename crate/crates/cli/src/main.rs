use clap::Parser;

fn main() {
    let cli = habdf_cli::Cli::parse();
    if let Err(e) = habdf_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
