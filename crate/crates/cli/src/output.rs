use std::fs::File;
use std::io::{BufWriter, Write};

use serde::Serialize;

use pfdyn_core::system::{System, SystemSpec};

use crate::args::Cli;
use crate::error::CliError;

pub const REPORT_FORMAT: &str = "pfdyn-report";
pub const REPORT_VERSION: u32 = 1;

/// The resolved system as it entered the computation.
#[derive(Serialize)]
pub struct SystemSummary {
    pub name: String,
    pub dim: usize,
    pub params: std::collections::BTreeMap<String, f64>,
    pub blocks: Vec<usize>,
    pub tau: Vec<f64>,
    pub delta: Vec<f64>,
    pub field: SystemSpec,
}

impl SystemSummary {
    pub fn new(system: &System, blocks: Vec<usize>, tau: Vec<f64>, delta: Vec<f64>) -> Self {
        let vars: Vec<&str> = system.vars.iter().map(String::as_str).collect();
        Self {
            name: system.name.clone(),
            dim: system.field.dim_in(),
            params: system.params.clone(),
            blocks,
            tau,
            delta,
            field: SystemSpec::from_field(&system.name, &vars, &system.field),
        }
    }
}

#[derive(Serialize)]
pub struct Report<'a, T: Serialize> {
    pub format: &'static str,
    pub version: u32,
    pub command: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub config: &'a Cli,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemSummary>,
    pub result: T,
}

pub fn create(path: &str) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|source| CliError::Io {
        path: path.to_string(),
        source,
    })
}

fn io_err(path: &str) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_string(),
        source,
    }
}

/// Writes pretty JSON to `path`, or to stdout when `path` is `None`.
pub fn emit_json<T: Serialize>(value: &T, path: Option<&str>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    match path {
        Some(p) => {
            let mut w = create(p)?;
            writeln!(w, "{text}").and_then(|_| w.flush()).map_err(io_err(p))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

/// Shortest decimal that reads back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub struct CsvWriter {
    path: String,
    w: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &str, header: &[&str]) -> Result<Self, CliError> {
        let mut w = Self {
            path: path.to_string(),
            w: create(path)?,
        };
        w.raw_row(header.iter().map(|s| s.to_string()))?;
        Ok(w)
    }

    pub fn raw_row(&mut self, cells: impl IntoIterator<Item = String>) -> Result<(), CliError> {
        let line = cells.into_iter().collect::<Vec<_>>().join(",");
        writeln!(self.w, "{line}").map_err(io_err(&self.path))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.w.flush().map_err(io_err(&self.path))
    }
}

/// `PFDU` density file: magic, version, dimension, cells per axis, box
/// bounds, state count and weights, all little-endian.
pub fn write_density(
    path: &str,
    cells: &[usize],
    lower: &[f64],
    upper: &[f64],
    weights: &[f64],
) -> Result<(), CliError> {
    let mut w = create(path)?;
    let mut buf = Vec::with_capacity(24 + 24 * cells.len() + 8 * weights.len());
    buf.extend_from_slice(b"PFDU");
    buf.extend_from_slice(&1u32.to_le_bytes());
    buf.extend_from_slice(&(cells.len() as u32).to_le_bytes());
    for c in cells {
        buf.extend_from_slice(&(*c as u64).to_le_bytes());
    }
    for v in lower.iter().chain(upper) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf.extend_from_slice(&(weights.len() as u64).to_le_bytes());
    for v in weights {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).and_then(|_| w.flush()).map_err(io_err(path))
}
