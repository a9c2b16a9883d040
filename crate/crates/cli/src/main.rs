use clap::Parser;

use selftrap_lab::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = execute(&cli) {
        eprintln!("selftrap-lab: {e}");
        std::process::exit(e.exit_code());
    }
}
