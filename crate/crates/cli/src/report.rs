//! Report assembly and serialization.

use std::io::Write;
use std::path::Path;

use qrl_core::rng::RNG_NAME;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Everything that determines a run, hashed into the header. Output paths are not part of it.
#[derive(Debug, Default)]
pub struct Config {
    pub command: String,
    pub params: Map<String, Value>,
    pub inputs: Map<String, Value>,
    pub seed: Option<u64>,
}

impl Config {
    pub fn new(command: &str) -> Self {
        Config { command: command.into(), ..Default::default() }
    }

    pub fn param(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        self.params.insert(key.into(), serde_json::to_value(v).expect("serializable parameter"));
        self
    }

    pub fn input(&mut self, key: &str, bytes: &[u8]) -> &mut Self {
        self.inputs.insert(key.into(), Value::String(sha256_hex(bytes)));
        self
    }

    pub fn hash(&self) -> String {
        let v = json!({
            "command": self.command,
            "params": self.params,
            "inputs": self.inputs,
            "seed": self.seed,
        });
        sha256_hex(v.to_string().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub rng: &'static str,
}

/// A command result: summary fields plus an optional table.
#[derive(Debug, Default)]
pub struct Report {
    pub summary: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Set when the run found an invariant or oracle violation.
    pub violation: Option<String>,
}

impl Report {
    pub fn set(&mut self, key: &str, v: impl Serialize) -> &mut Self {
        self.summary.insert(key.into(), serde_json::to_value(v).expect("serializable field"));
        self
    }

    pub fn table(&mut self, columns: &[&str]) -> &mut Self {
        self.columns = columns.iter().map(|c| c.to_string()).collect();
        self
    }

    pub fn row(&mut self, values: Vec<Value>) {
        self.rows.push(values);
    }

    pub fn fail(&mut self, why: impl Into<String>) {
        if self.violation.is_none() {
            self.violation = Some(why.into());
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn render(cfg: &Config, report: &Report, format: Format, pretty: bool) -> Result<Vec<u8>, Failure> {
    let header = Header {
        tool: "qrl",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.clone(),
        config_sha256: cfg.hash(),
        seed: cfg.seed,
        rng: RNG_NAME,
    };
    match format {
        Format::Json => {
            let rows: Vec<Value> = report
                .rows
                .iter()
                .map(|r| Value::Object(report.columns.iter().cloned().zip(r.iter().cloned()).collect()))
                .collect();
            let mut doc = json!({ "header": header, "summary": report.summary });
            if !report.columns.is_empty() {
                doc["rows"] = Value::Array(rows);
            }
            doc["pass"] = Value::Bool(report.violation.is_none());
            let mut out = if pretty { serde_json::to_vec_pretty(&doc) } else { serde_json::to_vec(&doc) }
                .map_err(|e| Failure::Io(e.to_string()))?;
            out.push(b'\n');
            Ok(out)
        }
        Format::Csv => {
            let mut out = Vec::new();
            let h = serde_json::to_value(&header).map_err(|e| Failure::Io(e.to_string()))?;
            for (k, v) in h.as_object().into_iter().flatten() {
                writeln!(out, "# {k}={}", cell(v)).ok();
            }
            for (k, v) in &report.summary {
                writeln!(out, "# {k}={}", cell(v)).ok();
            }
            writeln!(out, "# pass={}", report.violation.is_none()).ok();
            if !report.columns.is_empty() {
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(&report.columns).map_err(|e| Failure::Io(e.to_string()))?;
                for r in &report.rows {
                    w.write_record(r.iter().map(cell)).map_err(|e| Failure::Io(e.to_string()))?;
                }
                w.flush().map_err(|e| Failure::Io(e.to_string()))?;
            }
            Ok(out)
        }
    }
}

pub fn emit(bytes: &[u8], out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(|e| Failure::Io(e.to_string())),
    }
}
