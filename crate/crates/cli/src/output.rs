//! Output envelopes and destinations.

use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use realizer_core::export::to_json17;
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// `{"schema": "1", "command": …, …fields}` with 17-digit floats.
pub fn envelope(command: &str, fields: Vec<(&str, Value)>) -> String {
    let mut m = Map::new();
    m.insert("schema".into(), Value::from("1"));
    m.insert("command".into(), Value::from(command));
    for (k, v) in fields {
        m.insert(k.into(), v);
    }
    let mut s = to_json17(&Value::Object(m));
    s.push('\n');
    s
}

pub fn value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

/// Writes to `out`, or stdout when absent.
pub fn emit(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::failure(format!("cannot write to stdout: {e}")))
        }
    }
}

/// RFC 4180 quoting.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
