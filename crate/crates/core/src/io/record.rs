//! Self-describing record files: a commented header followed by CSV.
//!
//! ```text
//! # herald-record
//! # schema_version: 1
//! # kind: probe2
//! # seed: 7
//! # config_sha256: 3b1f...
//! # rows: 10000
//! # column: shot [1]
//! # column: c1 [counts]
//! # meta: n_photons = 12345
//! #| seed = 7
//! #| ...
//! shot,c1,c2
//! 0,97,104
//! ```
//!
//! Lines starting with `#|` carry the canonical run configuration; its
//! SHA-256 must match `config_sha256`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::config::{parse_config, sha256_hex, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;
const MAGIC: &str = "# herald-record";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub unit: String,
}

impl Column {
    pub fn new(name: &str, unit: &str) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::Record(format!("missing column `{name}`")))
    }

    /// Parse one column as `T`.
    pub fn column<T: std::str::FromStr>(&self, name: &str) -> Result<Vec<T>> {
        let i = self.index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                row[i]
                    .parse()
                    .map_err(|_| Error::Record(format!("row {r}: cannot parse `{}` in column `{name}`", row[i])))
            })
            .collect()
    }
}

/// Format a float so that it reads back bit-identical.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordFile {
    pub kind: String,
    pub seed: u64,
    /// Canonical TOML of the run that produced the data.
    pub config_text: String,
    pub meta: Vec<(String, String)>,
    pub table: Table,
}

impl RecordFile {
    pub fn new(kind: &str, config: &RunConfig, table: Table) -> Result<Self> {
        Ok(Self {
            kind: kind.into(),
            seed: config.seed,
            config_text: config.canonical_toml()?,
            meta: Vec::new(),
            table,
        })
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn config(&self) -> Result<RunConfig> {
        parse_config(&self.config_text).map_err(|e| Error::Record(format!("embedded config: {e}")))
    }

    pub fn to_text(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        out.push_str(&format!("# schema_version: {SCHEMA_VERSION}\n"));
        out.push_str(&format!("# kind: {}\n", self.kind));
        out.push_str(&format!("# seed: {}\n", self.seed));
        out.push_str(&format!("# config_sha256: {}\n", sha256_hex(&self.config_text)));
        out.push_str(&format!("# rows: {}\n", self.table.rows.len()));
        for c in &self.table.columns {
            out.push_str(&format!("# column: {} [{}]\n", c.name, c.unit));
        }
        for (k, v) in &self.meta {
            out.push_str(&format!("# meta: {k} = {v}\n"));
        }
        for line in self.config_text.lines() {
            out.push_str("#| ");
            out.push_str(line);
            out.push('\n');
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.table.columns.iter().map(|c| c.name.as_str()))
            .map_err(|e| Error::Record(e.to_string()))?;
        for row in &self.table.rows {
            w.write_record(row).map_err(|e| Error::Record(e.to_string()))?;
        }
        let body = w.into_inner().map_err(|e| Error::Record(e.to_string()))?;
        out.push_str(std::str::from_utf8(&body).map_err(|e| Error::Record(e.to_string()))?);
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::Record(m);
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(bad("not a record file (missing magic line)".into()));
        }
        let mut header: Vec<(String, String)> = Vec::new();
        let mut columns = Vec::new();
        let mut meta = Vec::new();
        let mut config_lines = Vec::new();
        let mut body_start = None;
        for (i, line) in text.lines().enumerate().skip(1) {
            if let Some(rest) = line.strip_prefix("#| ") {
                config_lines.push(rest.to_string());
            } else if line == "#|" {
                config_lines.push(String::new());
            } else if let Some(rest) = line.strip_prefix("# ") {
                let (k, v) = rest
                    .split_once(": ")
                    .ok_or_else(|| bad(format!("line {}: malformed header `{line}`", i + 1)))?;
                match k {
                    "column" => {
                        let (name, unit) = v
                            .strip_suffix(']')
                            .and_then(|s| s.split_once(" ["))
                            .ok_or_else(|| bad(format!("line {}: malformed column `{v}`", i + 1)))?;
                        columns.push(Column::new(name, unit));
                    }
                    "meta" => {
                        let (mk, mv) = v
                            .split_once(" = ")
                            .ok_or_else(|| bad(format!("line {}: malformed meta `{v}`", i + 1)))?;
                        meta.push((mk.to_string(), mv.to_string()));
                    }
                    _ => header.push((k.to_string(), v.to_string())),
                }
            } else {
                body_start = Some(i);
                break;
            }
        }
        let get = |k: &str| {
            header
                .iter()
                .find(|(h, _)| h == k)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| bad(format!("missing header field `{k}`")))
        };
        let version: u32 = get("schema_version")?
            .parse()
            .map_err(|_| bad("schema_version is not an integer".into()))?;
        if version != SCHEMA_VERSION {
            return Err(bad(format!("unsupported schema version {version}")));
        }
        let kind = get("kind")?;
        let seed: u64 = get("seed")?.parse().map_err(|_| bad("seed is not an integer".into()))?;
        let n_rows: usize = get("rows")?.parse().map_err(|_| bad("rows is not an integer".into()))?;
        let mut config_text = config_lines.join("\n");
        if !config_lines.is_empty() {
            config_text.push('\n');
        }
        let hash = get("config_sha256")?;
        if sha256_hex(&config_text) != hash {
            return Err(bad("config hash does not match the embedded config".into()));
        }
        let body_start = body_start.ok_or_else(|| bad("missing column header row".into()))?;
        let body: String = text.lines().skip(body_start).collect::<Vec<_>>().join("\n");
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let names: Vec<String> = reader
            .headers()
            .map_err(|e| bad(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if names.len() != columns.len() || names.iter().zip(&columns).any(|(n, c)| *n != c.name) {
            return Err(bad("column header row does not match the declared columns".into()));
        }
        let mut rows = Vec::with_capacity(n_rows);
        for (r, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| bad(format!("row {r}: {e}")))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        if rows.len() != n_rows {
            return Err(bad(format!("header declares {n_rows} rows, found {}", rows.len())));
        }
        Ok(Self {
            kind,
            seed,
            config_text,
            meta,
            table: Table { columns, rows },
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Record(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Write via a temporary file in the target directory and rename, so a
    /// failure never leaves a partial file behind.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_text()?)
    }
}

pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::InvalidArgument(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(text.as_bytes())?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}
