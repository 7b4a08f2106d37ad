use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use timoshenko::config::{Cli, FileConfig, RunConfig, OUT_DIR_VAR};
use timoshenko::{app, AppError};

fn configure() -> Result<RunConfig, AppError> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            std::process::exit(0);
        }
        Err(e) => return Err(AppError::usage(e.to_string())),
    };
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let env_out = std::env::var_os(OUT_DIR_VAR).map(PathBuf::from);
    RunConfig::resolve(&cli, &file, env_out)
}

fn main() -> ExitCode {
    let result = configure().and_then(|config| app::execute(&config, &mut std::io::stdout().lock()));
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
