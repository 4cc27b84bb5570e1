use std::process::ExitCode;

use clap::Parser;
use spectral_score_cli::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = spectral_score_cli::init_threads().and_then(|()| spectral_score_cli::run(&cli.command));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
