//! Tables with a provenance header, rendered as sectioned CSV or one JSON object.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::config::Format;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

impl InputDigest {
    pub fn new(role: &str, path: &Path, data: &[u8]) -> Self {
        Self {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(data)),
            bytes: data.len(),
        }
    }
}

/// Reads a whole input file, recording its digest.
pub fn read_input(role: &str, path: &Path, digests: &mut Vec<InputDigest>) -> CliResult<Vec<u8>> {
    let data = std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    digests.push(InputDigest::new(role, path, &data));
    Ok(data)
}

#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub params: Map<String, Value>,
    pub inputs: Vec<InputDigest>,
    /// Command-specific results that belong in the header, such as an implied ρ.
    #[serde(skip_serializing_if = "Map::is_empty")]
    pub info: Map<String, Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl Metadata {
    pub fn new(command: &'static str) -> Self {
        Self {
            tool: env!("CARGO_BIN_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            params: Map::new(),
            inputs: Vec::new(),
            info: Map::new(),
            warnings: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.params.insert(key.into(), serde_json::to_value(value).expect("serializable parameter"));
    }

    pub fn info(&mut self, key: &str, value: impl Serialize) {
        self.info.insert(key.into(), serde_json::to_value(value).expect("serializable value"));
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        let msg = msg.into();
        eprintln!("warning: {msg}");
        self.warnings.push(msg);
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_columns(name: &str, columns: Vec<String>) -> Self {
        Self {
            name: name.to_string(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().cloned()).collect()))
                .collect(),
        )
    }
}

/// Cell for an optional float; missing and non-finite values render as null.
pub fn opt(v: Option<f64>) -> Value {
    v.filter(|x| x.is_finite()).map_or(Value::Null, Value::from)
}

pub fn num(v: f64) -> Value {
    opt(Some(v))
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub struct Report {
    pub metadata: Metadata,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(metadata: Metadata) -> Self {
        Self {
            metadata,
            tables: Vec::new(),
        }
    }

    fn write_csv<W: Write>(&self, mut w: W) -> CliResult<()> {
        let m = &self.metadata;
        writeln!(w, "# tool: {} {}", m.tool, m.version)?;
        writeln!(w, "# command: {}", m.command)?;
        writeln!(w, "# params: {}", Value::Object(m.params.clone()))?;
        for i in &m.inputs {
            writeln!(w, "# input: {} path={} sha256={} bytes={}", i.role, i.path, i.sha256, i.bytes)?;
        }
        for (k, v) in &m.info {
            writeln!(w, "# {k}: {v}")?;
        }
        for warning in &m.warnings {
            writeln!(w, "# warning: {warning}")?;
        }
        for (i, t) in self.tables.iter().enumerate() {
            if i > 0 {
                writeln!(w)?;
            }
            writeln!(w, "# section: {}", t.name)?;
            let mut wtr = csv::WriterBuilder::new().from_writer(&mut w);
            wtr.write_record(&t.columns)?;
            for row in &t.rows {
                wtr.write_record(row.iter().map(cell))?;
            }
            wtr.flush()?;
        }
        Ok(())
    }

    fn write_json<W: Write>(&self, mut w: W) -> CliResult<()> {
        let mut root = Map::new();
        root.insert("metadata".into(), serde_json::to_value(&self.metadata)?);
        for t in &self.tables {
            root.insert(t.name.clone(), t.to_json());
        }
        serde_json::to_writer_pretty(&mut w, &Value::Object(root))?;
        writeln!(w)?;
        Ok(())
    }

    pub fn write(&self, format: Format, dest: Option<&PathBuf>) -> CliResult<()> {
        let mut buf = Vec::new();
        match format {
            Format::Csv => self.write_csv(&mut buf)?,
            Format::Json => self.write_json(&mut buf)?,
        }
        write_bytes(dest, &buf)
    }
}

pub fn write_bytes(dest: Option<&PathBuf>, bytes: &[u8]) -> CliResult<()> {
    match dest {
        Some(path) => std::fs::write(path, bytes).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        }),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}
