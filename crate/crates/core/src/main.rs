use std::process::ExitCode;

use clap::Parser;
use posecorrect::cli::{run, Cli, EXIT_INPUT_ERROR};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POSECORRECT_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT_ERROR as u8)
        }
    }
}
