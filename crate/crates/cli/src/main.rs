mod args;
mod commands;

use std::fmt;
use std::process::ExitCode;

use clap::Parser;
use clap::error::ErrorKind;

use args::{Cli, Command};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Core(tvdmd_core::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        use tvdmd_core::Error as E;
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(E::InvalidInput(_) | E::ModeError(_) | E::WindowSizeMismatch { .. }) => 1,
            CliError::Core(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
            CliError::Core(e) => e.fmt(f),
        }
    }
}

impl From<tvdmd_core::Error> for CliError {
    fn from(e: tvdmd_core::Error) -> Self {
        CliError::Core(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Gen(c) => commands::gen(c),
        Command::Stream(c) => commands::stream(c),
        Command::Compare(c) => commands::compare(c),
        Command::Spectrum(c) => commands::spectrum(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tvdmd: {e}");
            ExitCode::from(e.code())
        }
    }
}
