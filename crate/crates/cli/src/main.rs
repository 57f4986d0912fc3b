use clap::Parser;

fn main() {
    let cli = textprof_cli::Cli::parse();
    if let Err(e) = textprof_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
