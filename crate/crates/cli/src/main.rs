use std::process::ExitCode;

use clap::Parser;
use oqrw_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("oqrw: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
