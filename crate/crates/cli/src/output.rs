use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};

/// Collects what one run wrote so the metadata file can list it.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn create(&mut self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::file(&path, e))?;
        self.written.push(name.to_string());
        Ok((path, BufWriter::new(file)))
    }

    /// Writes `rows` with a header row. `header` is only used when there are
    /// no rows to take field names from.
    pub fn csv<T: Serialize>(&mut self, name: &str, header: &[&str], rows: &[T]) -> Result<()> {
        let (path, w) = self.create(name)?;
        let fail = |e: csv::Error| CliError::file(&path, e);
        let mut wtr = csv::WriterBuilder::new()
            .has_headers(!rows.is_empty())
            .from_writer(w);
        if rows.is_empty() {
            wtr.write_record(header).map_err(fail)?;
        }
        for r in rows {
            wtr.serialize(r).map_err(fail)?;
        }
        wtr.flush().map_err(|e| CliError::file(&path, e))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let (path, mut w) = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::file(&path, e))?;
        w.write_all(b"\n")
            .and_then(|_| w.flush())
            .map_err(|e| CliError::file(&path, e))
    }

    pub fn jsonl<T: Serialize>(&mut self, name: &str, records: &[T]) -> Result<()> {
        let (path, mut w) = self.create(name)?;
        prodtraj::ingest::write_jsonl(&mut w, records)
            .and_then(|_| w.flush())
            .map_err(|e| CliError::file(&path, e))
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let (path, mut w) = self.create(name)?;
        w.write_all(body.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| CliError::file(&path, e))
    }

    /// Writes `run_metadata_<command>.json` last, listing every other output.
    pub fn finish(mut self, mut meta: RunMetadata) -> Result<()> {
        meta.outputs = std::mem::take(&mut self.written);
        let name = format!("run_metadata_{}.json", meta.command);
        self.json(&name, &meta)
    }
}

/// Everything needed to rerun a command and get the same bytes. No
/// timestamps or host details, so reruns compare equal.
#[derive(Debug, Serialize)]
pub struct RunMetadata {
    pub command: String,
    pub library_version: String,
    /// Effective arguments after config merging.
    pub config: Value,
    pub seed: Option<u64>,
    /// The seed was drawn because none was given.
    pub seed_generated: bool,
    /// Fixed methodological choices the results depend on.
    pub decisions: BTreeMap<String, Value>,
    /// Record counts: loaded, skipped and why.
    pub counts: BTreeMap<String, usize>,
    pub outputs: Vec<String>,
}

impl RunMetadata {
    pub fn new(command: &str, config: Value) -> Self {
        Self {
            command: command.to_string(),
            library_version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            seed: None,
            seed_generated: false,
            decisions: BTreeMap::new(),
            counts: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn decide(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.decisions.insert(key.to_string(), value.into());
        self
    }

    pub fn count(&mut self, key: &str, n: usize) -> &mut Self {
        self.counts.insert(key.to_string(), n);
        self
    }

    /// Uses `given` or draws a fresh seed, recording which.
    pub fn seed(&mut self, given: Option<u64>) -> u64 {
        let seed = given.unwrap_or_else(rand::random);
        self.seed = Some(seed);
        self.seed_generated = given.is_none();
        seed
    }
}
