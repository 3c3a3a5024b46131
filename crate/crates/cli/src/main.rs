use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = adr_cli::Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    match adr_cli::run(cli, &argv) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let msg = format!("{e:#}").replace('\n', " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
