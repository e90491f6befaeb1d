use std::process::ExitCode;

use clap::Parser;
use dualring_cli::cli::Cli;
use dualring_cli::commands;
use dualring_cli::config::RunConfig;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let result = RunConfig::load(cli.global.config.as_deref(), &cli.global.overrides())
        .and_then(|cfg| commands::run(&cfg, &cli.command));
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
