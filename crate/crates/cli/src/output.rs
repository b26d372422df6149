//! Output files. CSV series start with `#` comment lines carrying the run
//! metadata; NDJSON summaries start with a metadata record. Floats are
//! written in shortest round-trip form, so equal runs give equal bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use tgf_core::model::ConstantSet;

use crate::{CliError, VERSION};

/// Everything needed to re-run: code version, config hash, seed, constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub constants: ConstantSet,
}

impl Metadata {
    pub fn new(config_hash: &str, seed: u64, constants: ConstantSet) -> Self {
        Self { version: VERSION.to_string(), config_hash: config_hash.to_string(), seed, constants }
    }
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir.display(), e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path.display(), e))
}

/// Streams rows into a CSV file with the metadata header.
pub struct CsvSink {
    path: PathBuf,
    writer: csv::Writer<BufWriter<File>>,
}

impl CsvSink {
    pub fn create(path: &Path, meta: &Metadata, columns: &[&str]) -> Result<Self, CliError> {
        let mut w = create(path)?;
        let json = serde_json::to_string(&meta.constants).expect("constants serialize");
        write!(
            w,
            "# tgf {}\n# config_hash={}\n# seed={}\n# constants={}\n",
            meta.version, meta.config_hash, meta.seed, json
        )
        .map_err(|e| CliError::io(path.display(), e))?;
        let mut writer = csv::Writer::from_writer(w);
        writer.write_record(columns).map_err(|e| csv_error(path, e))?;
        Ok(Self { path: path.to_path_buf(), writer })
    }

    pub fn row(&mut self, values: &[String]) -> Result<(), CliError> {
        self.writer.write_record(values).map_err(|e| csv_error(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.writer.flush().map_err(|e| CliError::io(self.path.display(), e))
    }
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    CliError::Other(format!("{}: {e}", path.display()))
}

/// Shortest round-trip decimal; exponent form outside `[1e-5, 1e16)`.
pub fn fmt(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Writes a metadata record followed by one JSON line per record.
pub fn write_ndjson<T: Serialize>(path: &Path, meta: &Metadata, records: &[T]) -> Result<(), CliError> {
    let mut w = create(path)?;
    let mut line = |v: serde_json::Value| -> Result<(), CliError> {
        serde_json::to_writer(&mut w, &v).map_err(|e| CliError::Other(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| CliError::io(path.display(), e))
    };
    line(serde_json::json!({ "record": "metadata", "metadata": meta }))?;
    for r in records {
        line(serde_json::to_value(r).map_err(|e| CliError::Other(e.to_string()))?)?;
    }
    w.flush().map_err(|e| CliError::io(path.display(), e))
}

/// Gnuplot-friendly copy of a CSV file: comments kept, the header turned into
/// a comment, fields separated by single spaces.
pub fn csv_to_dat(input: &Path, output: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(input).map_err(|e| CliError::io(input.display(), e))?;
    let mut out = create(output)?;
    let mut header_done = false;
    let mut body = String::new();
    for line in text.lines() {
        if line.starts_with('#') {
            body.push_str(line);
        } else if !header_done {
            header_done = true;
            body.push_str("# ");
            body.push_str(&line.replace(',', " "));
        } else {
            body.push_str(&line.replace(',', " "));
        }
        body.push('\n');
    }
    out.write_all(body.as_bytes()).map_err(|e| CliError::io(output.display(), e))?;
    out.flush().map_err(|e| CliError::io(output.display(), e))
}
