//! Command-line front end for `krigrel`.
//!
//! Exit codes: 0 on success, 1 for usage, parameter, configuration and I/O
//! errors, 2 when the numerics fail (the parameters involved are echoed on
//! stderr).

pub mod args;
mod commands;
mod io;
pub mod svg;

use std::ffi::OsString;

use clap::error::ErrorKind;
use clap::Parser;

pub use commands::{load_config, load_model, resolve_fit, resolve_kernel, ModelConfig, ModelFile};

use args::{Cli, Command};

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = match &cli.command {
        Command::KernelEval(a) => commands::kernel_eval(a),
        Command::Fit(a) => commands::fit_cmd(a),
        Command::Predict(a) => commands::predict(a),
        Command::Power(a) => commands::power(a),
        Command::Reliability(a) => commands::reliability(a),
        Command::Experiment(a) => commands::experiment(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) if f.error.is_numerical() => {
            eprintln!("numerical error: {}", f.error);
            if !f.context.is_empty() {
                eprintln!("parameters: {}", f.context);
            }
            2
        }
        Err(f) => {
            eprintln!("error: {}", f.error);
            1
        }
    }
}
