//! `framesub`: frame bounds, subsampling, MZ node generation, least-squares
//! recovery and experiment reproduction from the command line.
//!
//! Exit codes: 0 on success, 2 on invalid input or flags, 3 when an
//! algorithm fails. Failures print a JSON error object on stderr.

mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use framesub_core::FrameError;
use serde::Serialize;

use args::Cli;

#[derive(Serialize)]
struct ErrorContext {
    #[serde(skip_serializing_if = "Option::is_none")]
    iteration: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma_min: Option<f64>,
}

#[derive(Serialize)]
struct ErrorReport {
    code: &'static str,
    message: String,
    context: ErrorContext,
}

fn error_report(err: &FrameError) -> ErrorReport {
    let context = match err {
        FrameError::SelectionFailure { iteration, .. } => ErrorContext { iteration: Some(*iteration), sigma_min: None },
        FrameError::RankDeficient { sigma_min } => ErrorContext { iteration: None, sigma_min: Some(*sigma_min) },
        _ => ErrorContext { iteration: None, sigma_min: None },
    };
    ErrorReport { code: err.code(), message: err.to_string(), context }
}

fn configure_threads() -> Result<(), FrameError> {
    let Ok(value) = std::env::var("FRAMESUB_THREADS") else { return Ok(()) };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| FrameError::InvalidInput(format!("FRAMESUB_THREADS must be a positive integer, got '{value}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| FrameError::InvalidConfig(format!("cannot size the thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match configure_threads().and_then(|()| commands::run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let json = serde_json::to_string(&error_report(&err)).expect("error report serializes");
            eprintln!("{json}");
            ExitCode::from(if err.is_validation() { 2 } else { 3 })
        }
    }
}
