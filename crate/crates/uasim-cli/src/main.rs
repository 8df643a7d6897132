use clap::Parser;

fn main() {
    let cli = uasim_cli::Cli::parse();
    if let Err(e) = uasim_cli::dispatch(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
