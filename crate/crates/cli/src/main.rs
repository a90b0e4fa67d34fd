//! `hamindex`: run one index computation described by a JSON config.

mod commands;
mod config;
mod traces;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use hamindex::{Error, ErrorKind};
use serde_json::{json, Value};

const EXIT_OK: u8 = 0;
const EXIT_CONFIG: u8 = 2;
const EXIT_NOT_ADMISSIBLE: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;
const EXIT_DISAGREEMENT: u8 = 5;

#[derive(Parser, Debug)]
#[command(name = "hamindex", version, about = "Index computations for periodic linear Hamiltonian families")]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for CSV traces.
    #[arg(long)]
    traces: Option<PathBuf>,
    /// Worker threads. Computations currently run on one thread.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Seed for randomized families.
    #[arg(long, default_value_t = 2024)]
    seed: u64,
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => EXIT_CONFIG,
        ErrorKind::NotAdmissible => EXIT_NOT_ADMISSIBLE,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

fn kind_name(e: &Error) -> &'static str {
    match e.kind() {
        ErrorKind::Config => "config",
        ErrorKind::NotAdmissible => "not-admissible",
        ErrorKind::Numerical => "numerical",
    }
}

fn error_value(e: &Error) -> Value {
    json!({ "kind": kind_name(e), "reason": e.reason(), "message": e.to_string() })
}

fn report(command: &str, status: &str, code: u8, result: Value, error: Option<&Error>) -> Value {
    json!({
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "status": status,
        "exit_code": code,
        "result": result,
        "error": error.map(error_value),
    })
}

/// Writes through a sibling temporary file so readers never see a partial report.
fn write_atomic(path: &Path, text: &str) -> anyhow::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

fn execute(args: &Args) -> (Value, u8, Vec<traces::Trace>) {
    if args.threads == 0 {
        let e = Error::Invalid("--threads must be positive".into());
        return (report("unknown", "error", EXIT_CONFIG, Value::Null, Some(&e)), EXIT_CONFIG, Vec::new());
    }
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(io) => {
            let e = Error::Invalid(format!("cannot read {}: {io}", args.config.display()));
            return (report("unknown", "error", EXIT_CONFIG, Value::Null, Some(&e)), EXIT_CONFIG, Vec::new());
        }
    };
    let cfg = match config::parse(&text) {
        Ok(c) => c,
        Err(e) => return (report("unknown", "error", EXIT_CONFIG, Value::Null, Some(&e)), EXIT_CONFIG, Vec::new()),
    };
    let command = cfg.task.name();
    match commands::run(&cfg, args.seed) {
        Ok(outcome) => {
            if let Some(e) = &outcome.failure {
                let code = exit_code(e);
                (report(command, "error", code, outcome.result, Some(e)), code, outcome.traces)
            } else if outcome.disagreement {
                (report(command, "disagreement", EXIT_DISAGREEMENT, outcome.result, None), EXIT_DISAGREEMENT, outcome.traces)
            } else {
                (report(command, "ok", EXIT_OK, outcome.result, None), EXIT_OK, outcome.traces)
            }
        }
        Err(e) => {
            let code = exit_code(&e);
            (report(command, "error", code, Value::Null, Some(&e)), code, Vec::new())
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (value, code, traces) = execute(&args);
    let text = serde_json::to_string_pretty(&value).expect("report serializes") + "\n";
    let written = match &args.out {
        Some(path) => write_atomic(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    };
    if let Err(e) = written {
        eprintln!("hamindex: {e:#}");
        return ExitCode::from(EXIT_CONFIG);
    }
    if let Some(dir) = &args.traces {
        for t in &traces {
            if let Err(e) = t.write(dir) {
                eprintln!("hamindex: {e:#}");
                return ExitCode::from(EXIT_CONFIG);
            }
        }
    }
    if code != EXIT_OK {
        if let Some(msg) = value["error"]["message"].as_str() {
            eprintln!("hamindex: {msg}");
        }
    }
    ExitCode::from(code)
}
