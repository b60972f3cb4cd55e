//! Command-line front end: every verb reads JSON, runs one pipeline and
//! emits a deterministic JSON report. Exit codes are 0 on a clean report,
//! 2 for bad input, 3 when the input is outside the domain of the
//! construction and 4 when a check fails.

pub mod args;
pub mod commands;
pub mod report;
pub mod svg;

use std::ffi::OsString;

use clap::Parser;

use args::{Cli, Command};
use commands::Stop;
use report::{write_atomic, Report, EXIT_INPUT, EXIT_PASS, EXIT_VERIFY};

const THREADS_VAR: &str = "FIBRATION_FORGE_THREADS";

fn configure_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got {raw:?}"))?;
    // a pool installed earlier in this process wins
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
        }
    };
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return EXIT_INPUT;
    }
    let echo = serde_json::to_value(&cli.command).expect("arguments serialize");
    let mut report = Report::new(echo, cli.seed);
    let result = match &cli.command {
        Command::Retract(a) => commands::retract(a, &mut report),
        Command::Angles(a) => commands::angles(a, &mut report),
        Command::BuildFibration(a) => commands::build(a, cli.seed, &mut report),
        Command::Verify(a) => commands::verify(a, cli.seed, &mut report),
        Command::ExtendGerm(a) => commands::extend(a, cli.seed, &mut report),
        Command::SampleFibres(a) => commands::sample_fibres(a, cli.seed, &mut report),
        Command::Hopf(a) => commands::hopf(a, cli.seed, &mut report),
    };
    let mut code = match result {
        Ok(()) if report.pass => EXIT_PASS,
        Ok(()) => EXIT_VERIFY,
        Err(Stop { code, message }) => {
            eprintln!("error: {message}");
            report.fail_with(message);
            code
        }
    };
    let text = report.to_json();
    match &cli.report {
        Some(path) => {
            if let Err(e) = write_atomic(path, text.as_bytes()) {
                eprintln!("error: cannot write {}: {e}", path.display());
                code = code.max(EXIT_INPUT);
            }
        }
        None => print!("{text}"),
    }
    code
}
