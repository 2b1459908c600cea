mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Transfer(a) => commands::cmd_transfer(a, cli.json),
        Command::Sweep(a) => commands::cmd_sweep(a, cli.json),
        Command::Symb(a) => commands::cmd_symb(a, cli.json),
        Command::Clean(a) => commands::cmd_clean(a, cli.json),
        Command::Eval(a) => commands::cmd_eval(a, cli.json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
