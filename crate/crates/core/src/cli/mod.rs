//! Command-line front end. [`run`] returns the process exit code: 0 on
//! success, 1 on runtime failure, 2 on usage errors.

mod args;
mod commands;

use std::ffi::OsString;
use std::fs;

use clap::error::ErrorKind;
use clap::Parser;
use serde_json::{json, Value};

pub use args::{Cli, Command};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug)]
pub(crate) enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidArgument(msg) => CliError::Usage(msg),
            other => CliError::Runtime(other),
        }
    }
}

/// One JSON line on standard output.
pub(crate) fn emit(command: &str, status: &str, metrics: Value, paths: Value) {
    let line = json!({
        "command": command,
        "status": status,
        "metrics": metrics,
        "paths": paths,
    });
    println!("{line}");
}

fn config_flags(path: &str) -> Result<Vec<String>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| format!("malformed config {path}: {e}"))?;
    let Value::Object(map) = value else {
        return Err(format!("config {path} must be a JSON object"));
    };
    let mut flags = Vec::new();
    for (key, value) in map {
        let flag = if key == "K" {
            "--K".to_string()
        } else {
            format!("--{}", key.replace('_', "-"))
        };
        match value {
            Value::Null | Value::Bool(false) => {}
            Value::Bool(true) => flags.push(flag),
            Value::String(s) => flags.extend([flag, s]),
            Value::Number(n) => flags.extend([flag, n.to_string()]),
            Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                flags.extend([flag, parts.join(",")]);
            }
            Value::Object(_) => return Err(format!("config key '{key}' has a nested object")),
        }
    }
    Ok(flags)
}

/// Replaces `--config FILE` by the file's flags, placed right after the
/// subcommand so that explicit flags override them.
fn expand_config(mut args: Vec<String>) -> Result<Vec<String>, String> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = if let Some(p) = args[pos].strip_prefix("--config=") {
        let p = p.to_string();
        args.remove(pos);
        p
    } else {
        if pos + 1 >= args.len() {
            return Err("--config needs a file".into());
        }
        let p = args.remove(pos + 1);
        args.remove(pos);
        p
    };
    let flags = config_flags(&path)?;
    let sub = args
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|i| i + 2)
        .unwrap_or(args.len());
    args.splice(sub..sub, flags);
    Ok(args)
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("COGEDE_LOG", "error");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    init_logging();
    let args: Vec<String> = args
        .into_iter()
        .map(|a| a.into().to_string_lossy().into_owned())
        .collect();
    let args = match expand_config(args) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let name = match &cli.command {
        Command::Synth(_) => "synth",
        Command::Fit(_) => "fit",
        Command::Cv(_) => "cv",
        Command::Sweep(_) => "sweep",
    };
    let outcome = match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Fit(a) => commands::fit(a),
        Command::Cv(a) => commands::cv(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run 'cogede {name} --help' for usage");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            log::error!("{e}");
            emit(name, "error", json!({ "message": e.to_string() }), json!({}));
            EXIT_RUNTIME
        }
    }
}
