//! Plain-file record store.
//!
//! ```text
//! <root>/
//!   manifest.json          schema versions + sha256 of every tracked file
//!   risks.jsonl            append-only
//!   news.jsonl             append-only
//!   decompositions.jsonl   replaced per run
//!   matches.jsonl          replaced per run
//!   graph.json graph.dot   replaced per run
//!   embeddings.rrv         replaced per run
//!   report.jsonl report.md replaced per run
//!   run_summary.json       replaced per run
//!   partial_run.json       present while a run is in flight
//!   run.lock               advisory lock of the single writer
//! ```
//!
//! Every write goes data file first, manifest second. Replaced files are
//! written to a temporary name and renamed. On open, a file whose digest
//! disagrees with the manifest is an error unless the partial-run marker is
//! present; then appended tails are truncated back to the last committed
//! length and derived files are dropped so the next run rebuilds them.

use std::collections::{BTreeMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::extraction::{RiskDecomposition, RiskRecord};
use crate::matcher::RiskMatches;
use crate::newsfeed::NewsItem;

pub const STORE_SCHEMA: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const MARKER: &str = "partial_run.json";
pub const LOCK: &str = "run.lock";

pub const RISKS: &str = "risks.jsonl";
pub const NEWS: &str = "news.jsonl";
pub const DECOMPOSITIONS: &str = "decompositions.jsonl";
pub const MATCHES: &str = "matches.jsonl";
pub const GRAPH_JSON: &str = "graph.json";
pub const GRAPH_DOT: &str = "graph.dot";
pub const EMBEDDINGS: &str = "embeddings.rrv";
pub const REPORT_JSONL: &str = "report.jsonl";
pub const REPORT_MD: &str = "report.md";
pub const SUMMARY: &str = "run_summary.json";

const APPEND_ONLY: [&str; 2] = [RISKS, NEWS];

fn schema_of(file: &str) -> &'static str {
    match file {
        RISKS => "risks/1",
        NEWS => "news/1",
        DECOMPOSITIONS => "decompositions/1",
        MATCHES => "matches/1",
        GRAPH_JSON | GRAPH_DOT => crate::riskgraph::GRAPH_SCHEMA,
        EMBEDDINGS => "rrv/1",
        REPORT_JSONL | REPORT_MD => "report/1",
        SUMMARY => "summary/1",
        _ => "opaque/1",
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("store not found at {0}")]
    Missing(PathBuf),
    #[error("store file {file} does not match its manifest digest")]
    Corrupt { file: String },
    #[error("store {path}: bad record on line {line}: {reason}")]
    BadRecord { path: PathBuf, line: usize, reason: String },
    #[error("store schema {found} is not supported (expected {STORE_SCHEMA})")]
    Schema { found: u32 },
    #[error("store at {0} is locked by another run")]
    Locked(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub schema: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub store_schema: u32,
    pub files: BTreeMap<String, FileEntry>,
    /// Free-form facts such as the digest of the encoder that produced the
    /// embedding cache.
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl Default for Manifest {
    fn default() -> Self {
        Manifest { store_schema: STORE_SCHEMA, files: BTreeMap::new(), meta: BTreeMap::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialRun {
    pub stage: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Exclusive writer lock; released on drop.
#[derive(Debug)]
pub struct RunLock {
    file: File,
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = self.file.unlock();
    }
}

#[derive(Debug)]
pub struct RecordStore {
    root: PathBuf,
    manifest: Manifest,
    recovered: Option<PartialRun>,
}

impl RecordStore {
    /// Open the store at `root`, creating it if absent.
    pub fn open(root: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(root).map_err(|source| StoreError::Io { path: root.to_path_buf(), source })?;
        Self::open_existing(root)
    }

    /// Open a store that must already exist.
    pub fn open_existing(root: &Path) -> Result<Self, StoreError> {
        if !root.is_dir() {
            return Err(StoreError::Missing(root.to_path_buf()));
        }
        let mut store = RecordStore { root: root.to_path_buf(), manifest: Manifest::default(), recovered: None };
        if let Some(bytes) = store.read_raw(MANIFEST)? {
            store.manifest = serde_json::from_slice(&bytes).map_err(|e| StoreError::BadRecord {
                path: store.path(MANIFEST),
                line: 1,
                reason: e.to_string(),
            })?;
        }
        if store.manifest.store_schema != STORE_SCHEMA {
            return Err(StoreError::Schema { found: store.manifest.store_schema });
        }
        store.recovered = store.marker()?;
        store.verify()?;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// The marker found when the store was opened, if the previous run did
    /// not finish.
    pub fn recovered_from(&self) -> Option<&PartialRun> {
        self.recovered.as_ref()
    }

    fn io_err(&self, file: &str) -> impl FnOnce(io::Error) -> StoreError + '_ {
        let path = self.path(file);
        move |source| StoreError::Io { path, source }
    }

    fn read_raw(&self, file: &str) -> Result<Option<Vec<u8>>, StoreError> {
        match fs::read(self.path(file)) {
            Ok(bytes) => Ok(Some(bytes)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(self.io_err(file)(e)),
        }
    }

    fn verify(&mut self) -> Result<(), StoreError> {
        let interrupted = self.recovered.is_some();
        let mut changed = false;
        let tracked: Vec<(String, FileEntry)> =
            self.manifest.files.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
        for (name, entry) in tracked {
            let bytes = self.read_raw(&name)?.unwrap_or_default();
            if sha256_hex(&bytes) == entry.sha256 {
                continue;
            }
            if !interrupted {
                return Err(StoreError::Corrupt { file: name });
            }
            let committed = entry.bytes as usize;
            if APPEND_ONLY.contains(&name.as_str())
                && bytes.len() > committed
                && sha256_hex(&bytes[..committed]) == entry.sha256
            {
                log::warn!("{name}: dropping {} uncommitted bytes", bytes.len() - committed);
                let f = OpenOptions::new().write(true).open(self.path(&name)).map_err(self.io_err(&name))?;
                f.set_len(entry.bytes).map_err(self.io_err(&name))?;
                f.sync_all().map_err(self.io_err(&name))?;
            } else if APPEND_ONLY.contains(&name.as_str()) {
                return Err(StoreError::Corrupt { file: name });
            } else {
                log::warn!("{name}: incomplete from interrupted run, discarding");
                let _ = fs::remove_file(self.path(&name));
                self.manifest.files.remove(&name);
                changed = true;
            }
        }
        // files written by an interrupted run before their first commit
        for name in APPEND_ONLY {
            if !self.manifest.files.contains_key(name) && self.path(name).exists() {
                if !interrupted {
                    return Err(StoreError::Corrupt { file: name.to_string() });
                }
                log::warn!("{name}: uncommitted file from interrupted run, discarding");
                fs::remove_file(self.path(name)).map_err(self.io_err(name))?;
            }
        }
        if changed {
            self.write_manifest()?;
        }
        Ok(())
    }

    /// Take the single-writer lock, failing fast if another process holds it.
    pub fn lock(&self) -> Result<RunLock, StoreError> {
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(self.path(LOCK))
            .map_err(self.io_err(LOCK))?;
        match file.try_lock() {
            Ok(()) => Ok(RunLock { file }),
            Err(fs::TryLockError::WouldBlock) => Err(StoreError::Locked(self.root.clone())),
            Err(fs::TryLockError::Error(e)) => Err(self.io_err(LOCK)(e)),
        }
    }

    fn write_atomic(&self, file: &str, bytes: &[u8]) -> Result<(), StoreError> {
        let tmp = self.path(&format!(".{file}.tmp"));
        let err = self.io_err(file);
        let write = || -> io::Result<()> {
            let mut f = File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            fs::rename(&tmp, self.path(file))
        };
        write().map_err(err)
    }

    fn write_manifest(&self) -> Result<(), StoreError> {
        let mut text = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        text.push('\n');
        self.write_atomic(MANIFEST, text.as_bytes())
    }

    fn commit(&mut self, file: &str) -> Result<(), StoreError> {
        let bytes = self.read_raw(file)?.unwrap_or_default();
        self.manifest.files.insert(
            file.to_string(),
            FileEntry { schema: schema_of(file).to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) },
        );
        self.write_manifest()
    }

    pub fn set_meta(&mut self, key: &str, value: &str) -> Result<(), StoreError> {
        self.manifest.meta.insert(key.to_string(), value.to_string());
        self.write_manifest()
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.manifest.meta.get(key).map(String::as_str)
    }

    pub fn marker(&self) -> Result<Option<PartialRun>, StoreError> {
        match self.read_raw(MARKER)? {
            None => Ok(None),
            Some(bytes) => Ok(Some(
                serde_json::from_slice(&bytes).unwrap_or(PartialRun { stage: "unknown".to_string() }),
            )),
        }
    }

    pub fn set_marker(&self, stage: &str) -> Result<(), StoreError> {
        let text = serde_json::to_string(&PartialRun { stage: stage.to_string() }).expect("marker serializes");
        self.write_atomic(MARKER, text.as_bytes())
    }

    pub fn clear_marker(&mut self) -> Result<(), StoreError> {
        match fs::remove_file(self.path(MARKER)) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::NotFound => {}
            Err(e) => return Err(self.io_err(MARKER)(e)),
        }
        self.recovered = None;
        Ok(())
    }

    /// Replace a derived file and record its digest.
    pub fn replace(&mut self, file: &str, bytes: &[u8]) -> Result<(), StoreError> {
        assert!(!APPEND_ONLY.contains(&file), "{file} is append-only");
        self.write_atomic(file, bytes)?;
        self.commit(file)
    }

    pub fn replace_lines<T: Serialize>(&mut self, file: &str, records: &[T]) -> Result<(), StoreError> {
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).expect("record serializes");
            buf.push(b'\n');
        }
        self.replace(file, &buf)
    }

    fn append_lines<T: Serialize>(&mut self, file: &str, records: &[T]) -> Result<(), StoreError> {
        if records.is_empty() && self.manifest.files.contains_key(file) {
            return Ok(());
        }
        let mut buf = Vec::new();
        for r in records {
            serde_json::to_writer(&mut buf, r).expect("record serializes");
            buf.push(b'\n');
        }
        let err = self.io_err(file);
        let append = || -> io::Result<()> {
            let mut f = OpenOptions::new().create(true).append(true).open(self.path(file))?;
            f.write_all(&buf)?;
            f.sync_all()
        };
        append().map_err(err)?;
        self.commit(file)
    }

    pub fn read(&self, file: &str) -> Result<Option<Vec<u8>>, StoreError> {
        self.read_raw(file)
    }

    /// Records of a line file; later duplicates of an id are skipped.
    fn read_lines<T: DeserializeOwned>(&self, file: &str, id: impl Fn(&T) -> String) -> Result<Vec<T>, StoreError> {
        let Some(bytes) = self.read_raw(file)? else {
            return Ok(Vec::new());
        };
        let text = String::from_utf8_lossy(&bytes);
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: T = serde_json::from_str(line).map_err(|e| StoreError::BadRecord {
                path: self.path(file),
                line: i + 1,
                reason: e.to_string(),
            })?;
            let key = id(&record);
            if seen.insert(key.clone()) {
                out.push(record);
            } else {
                log::warn!("{file}: duplicate id {key} on line {} ignored", i + 1);
            }
        }
        Ok(out)
    }

    pub fn risks(&self) -> Result<Vec<RiskRecord>, StoreError> {
        self.read_lines(RISKS, |r: &RiskRecord| r.id.0.clone())
    }

    /// Append records whose id is new. Returns (added, duplicates).
    pub fn append_risks(&mut self, records: &[RiskRecord]) -> Result<(usize, usize), StoreError> {
        let mut known: HashSet<String> = self.risks()?.into_iter().map(|r| r.id.0).collect();
        let mut fresh = Vec::new();
        for r in records {
            if known.insert(r.id.0.clone()) {
                fresh.push(r);
            } else {
                log::warn!("risk {} already stored, skipped", r.id);
            }
        }
        self.append_lines(RISKS, &fresh)?;
        Ok((fresh.len(), records.len() - fresh.len()))
    }

    pub fn news(&self) -> Result<Vec<NewsItem>, StoreError> {
        self.read_lines(NEWS, |n: &NewsItem| n.id.clone())
    }

    /// Append items whose id is new. Returns (added, duplicates).
    pub fn append_news(&mut self, items: &[NewsItem]) -> Result<(usize, usize), StoreError> {
        let mut known: HashSet<String> = self.news()?.into_iter().map(|n| n.id).collect();
        let fresh: Vec<&NewsItem> = items.iter().filter(|n| known.insert(n.id.clone())).collect();
        self.append_lines(NEWS, &fresh)?;
        Ok((fresh.len(), items.len() - fresh.len()))
    }

    pub fn decompositions(&self) -> Result<Vec<RiskDecomposition>, StoreError> {
        self.read_lines(DECOMPOSITIONS, |d: &RiskDecomposition| d.risk_id.0.clone())
    }

    pub fn matches(&self) -> Result<Vec<RiskMatches>, StoreError> {
        self.read_lines(MATCHES, |m: &RiskMatches| m.risk_id.0.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn risk(id: &str) -> RiskRecord {
        RiskRecord::new(id, "Employee misconduct in the investment banking business causing a reputational damage", "t")
            .unwrap()
    }

    #[test]
    fn append_dedup_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RecordStore::open(dir.path()).unwrap();
        assert_eq!(store.append_risks(&[risk("A"), risk("B"), risk("A")]).unwrap(), (2, 1));
        assert_eq!(store.append_risks(&[risk("A"), risk("C")]).unwrap(), (1, 1));
        let reopened = RecordStore::open(dir.path()).unwrap();
        assert_eq!(reopened.risks().unwrap(), store.risks().unwrap());
        assert_eq!(reopened.risks().unwrap().len(), 3);
        assert_eq!(reopened.manifest().files[RISKS].schema, "risks/1");
    }

    #[test]
    fn tampering_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RecordStore::open(dir.path()).unwrap();
        store.append_risks(&[risk("A")]).unwrap();
        store.replace(GRAPH_DOT, b"digraph {}\n").unwrap();
        fs::write(dir.path().join(GRAPH_DOT), b"digraph { x }\n").unwrap();
        assert!(matches!(RecordStore::open(dir.path()), Err(StoreError::Corrupt { .. })));
    }

    #[test]
    fn interrupted_append_is_rolled_back() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = RecordStore::open(dir.path()).unwrap();
        store.append_risks(&[risk("A")]).unwrap();
        store.replace(GRAPH_DOT, b"digraph {}\n").unwrap();
        store.set_marker("news").unwrap();
        // torn append plus a half-written derived file
        let mut f = OpenOptions::new().append(true).open(dir.path().join(RISKS)).unwrap();
        f.write_all(b"{\"id\":\"B\",\"raw_te").unwrap();
        fs::write(dir.path().join(GRAPH_DOT), b"digr").unwrap();
        fs::write(dir.path().join(NEWS), b"{\"partial").unwrap();

        let mut store = RecordStore::open(dir.path()).unwrap();
        assert_eq!(store.recovered_from().unwrap().stage, "news");
        assert_eq!(store.risks().unwrap().len(), 1);
        assert!(!dir.path().join(GRAPH_DOT).exists());
        assert!(!dir.path().join(NEWS).exists());
        store.clear_marker().unwrap();
        assert!(RecordStore::open(dir.path()).unwrap().recovered_from().is_none());
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let store = RecordStore::open(dir.path()).unwrap();
        let held = store.lock().unwrap();
        assert!(matches!(store.lock(), Err(StoreError::Locked(_))));
        drop(held);
        assert!(store.lock().is_ok());
    }

    #[test]
    fn missing_store() {
        assert!(matches!(
            RecordStore::open_existing(Path::new("/nonexistent/riskradar-store")),
            Err(StoreError::Missing(_))
        ));
    }
}
