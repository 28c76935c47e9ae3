use std::process::ExitCode;

use clap::Parser;
use synthwrite_cli::{execute, extract_overrides, resolve_config, Cli, CliError, EXIT_CONFIG};

fn main() -> ExitCode {
    let (args, overrides) = match extract_overrides(std::env::args().collect()) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let result = resolve_config(&cli, &overrides)
        .map_err(CliError::from)
        .and_then(|cfg| execute(&cli, &cfg, &mut |line| println!("{line}")));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
