use std::io;
use std::process::ExitCode;

use clap::Parser;
use elane_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("elane: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
