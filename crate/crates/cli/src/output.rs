//! CSV tables, atomic file writes and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// A header row plus string cells, rendered with the `csv` crate.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I, S>(&mut self, row: I)
    where
        I: IntoIterator<Item = S>,
        S: ToString,
    {
        let row: Vec<String> = row.into_iter().map(|c| c.to_string()).collect();
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Comma separated, `.` decimal point, LF line endings.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Shortest round-trip form of a float (exponent notation for very small or
/// large magnitudes).
pub fn num(v: f64) -> String {
    ryu::Buffer::new().format(v).to_string()
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| CliError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(&tmp, e))?;
    f.sync_all().map_err(|e| CliError::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the run directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub kind: String,
    pub config_hash: String,
    /// The validated config, echoed with all defaults filled in.
    pub config: serde_json::Value,
    /// Every derived stream seed by name, plus the master seed.
    pub seeds: BTreeMap<String, u64>,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    /// Reads a manifest and checks every listed checksum against the files
    /// next to it.
    pub fn verify(dir: &Path) -> Result<RunManifest, CliError> {
        let path = dir.join(Self::FILE_NAME);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        let m: RunManifest =
            serde_json::from_str(&text).map_err(|e| CliError::validation(format!("bad manifest {path:?}: {e}")))?;
        for f in &m.files {
            let p = dir.join(&f.path);
            let bytes = fs::read(&p).map_err(|e| CliError::io(&p, e))?;
            if sha256_hex(&bytes) != f.sha256 {
                return Err(CliError::validation(format!("checksum mismatch for {p:?}")));
            }
        }
        Ok(m)
    }
}

/// Collects emitted files for the manifest.
#[derive(Debug, Default)]
pub struct OutputSet {
    pub dir: PathBuf,
    pub files: Vec<FileEntry>,
}

impl OutputSet {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        OutputSet { dir: dir.into(), files: Vec::new() }
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(&self.dir.join(rel), bytes)?;
        self.files.push(FileEntry { path: rel.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn write_table(&mut self, rel: &str, table: &Table) -> Result<(), CliError> {
        self.write(rel, &table.to_bytes())
    }

    /// Records a file that was written by other means.
    pub fn register(&mut self, rel: &str) -> Result<(), CliError> {
        let p = self.dir.join(rel);
        let bytes = fs::read(&p).map_err(|e| CliError::io(&p, e))?;
        self.files.push(FileEntry { path: rel.to_string(), sha256: sha256_hex(&bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    /// Writes the manifest; called last so its presence marks a complete run.
    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest, CliError> {
        manifest.files = self.files;
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        write_atomic(&self.dir.join(RunManifest::FILE_NAME), &json)?;
        Ok(manifest)
    }
}
