use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde_json::Value;

use crate::CliError;

/// Shortest representation that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:?}")
    }
}

pub fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

pub fn json(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("json value serializes");
    s.push('\n');
    s
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = ::csv::Writer::from_writer(Vec::new());
    let io_err = |e: ::csv::Error| CliError::Io(io::Error::other(e));
    w.write_record(header).map_err(io_err)?;
    for row in rows {
        w.write_record(row).map_err(io_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
