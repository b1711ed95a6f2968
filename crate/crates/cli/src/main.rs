use std::panic;
use std::process::ExitCode;

use clap::Parser;
use ularma_cli::commands::{run, Cli};
use ularma_cli::error::exit;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match panic::catch_unwind(|| run(cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.kind.exit_code()
        }
        Err(_) => exit::INTERNAL,
    };
    ExitCode::from(code as u8)
}
