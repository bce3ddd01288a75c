//! JSON report envelope and CSV writing.

use std::io::Write;
use std::path::Path;

use czsob::report::all_passed;
use czsob::{Check, SCHEMA_VERSION};
use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub data: serde_json::Value,
}

impl Report {
    pub fn new(command: &str, cfg: &RunConfig, checks: Vec<Check>, data: serde_json::Value) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
            passed: all_passed(&checks),
            checks,
            data,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Write to `path`, or to stdout when absent.
    pub fn emit(&self, path: Option<&str>) -> Result<(), CliError> {
        match path {
            Some(p) => write_file(p, self.to_json().as_bytes()),
            None => {
                std::io::stdout().write_all(self.to_json().as_bytes()).map_err(|e| CliError::Io("stdout".into(), e))
            }
        }
    }
}

pub fn write_file(path: &str, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = Path::new(path).parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.display().to_string(), e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Io(path.into(), e))
}

/// CSV with a leading `#` line carrying the schema version and config hash.
pub fn csv_bytes(cfg: &RunConfig, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut out = format!("# schema_version={SCHEMA_VERSION} config_hash={}\n", cfg.hash()).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header).map_err(CliError::run)?;
        for r in rows {
            w.write_record(r).map_err(CliError::run)?;
        }
        w.flush().map_err(|e| CliError::Io("csv".into(), e))?;
    }
    Ok(out)
}

/// Shortest round-tripping decimal form.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
