//! Append-only record of stage runs and the digests of their artifacts.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const LEDGER_FILE: &str = "ledger.jsonl";
pub const LOCK_FILE: &str = ".herdpipe.lock";
pub const TOOL_VERSION: &str = concat!("herdpipe ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub stage: String,
    pub status: StageStatus,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub started: f64,
    pub finished: f64,
    pub tool_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn hash_file(path: &Path, hasher: &mut Sha256) -> std::io::Result<()> {
    let mut f = File::open(path)?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            return Ok(());
        }
        hasher.update(&buf[..n]);
    }
}

fn walk(dir: &Path, base: &Path, out: &mut Vec<(String, PathBuf)>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let entry = entry?;
        let p = entry.path();
        if entry.file_type()?.is_dir() {
            walk(&p, base, out)?;
        } else {
            let rel = p.strip_prefix(base).unwrap_or(&p).to_string_lossy().replace('\\', "/");
            out.push((rel, p));
        }
    }
    Ok(())
}

/// SHA-256 of a file, or of a directory's sorted (relative path, content)
/// pairs. `None` when the path does not exist.
pub fn digest_path(path: &Path) -> std::io::Result<Option<String>> {
    if !path.exists() {
        return Ok(None);
    }
    let mut hasher = Sha256::new();
    if path.is_dir() {
        let mut files = Vec::new();
        walk(path, path, &mut files)?;
        files.sort();
        for (rel, p) in files {
            hasher.update(rel.as_bytes());
            hasher.update([0]);
            let mut inner = Sha256::new();
            hash_file(&p, &mut inner)?;
            hasher.update(inner.finalize());
        }
    } else {
        hash_file(path, &mut hasher)?;
    }
    Ok(Some(format!("{:x}", hasher.finalize())))
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub struct RunLedger {
    path: PathBuf,
}

impl RunLedger {
    pub fn new(root: &Path) -> Self {
        RunLedger { path: root.join(LEDGER_FILE) }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn entries(&self) -> std::io::Result<Vec<LedgerEntry>> {
        let f = match File::open(&self.path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e),
        };
        let mut out = Vec::new();
        for line in BufReader::new(f).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
        }
        Ok(out)
    }

    pub fn append(&self, entry: &LedgerEntry) -> std::io::Result<()> {
        if let Some(dir) = self.path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut f = OpenOptions::new().create(true).append(true).open(&self.path)?;
        let mut line = serde_json::to_string(entry).map_err(std::io::Error::other)?;
        line.push('\n');
        f.write_all(line.as_bytes())
    }

    /// The latest successful run of `stage`.
    pub fn last_ok(&self, stage: &str) -> std::io::Result<Option<LedgerEntry>> {
        Ok(self.entries()?.into_iter().rev().find(|e| e.stage == stage && e.status == StageStatus::Ok))
    }
}

/// Exclusive claim on a layout root, released on drop.
#[derive(Debug)]
pub struct RootLock {
    path: PathBuf,
}

impl RootLock {
    pub fn acquire(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root).map_err(|e| CliError::Config(format!("{}: {e}", root.display())))?;
        let path = root.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(RootLock { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(CliError::Locked(root.to_path_buf())),
            Err(e) => Err(CliError::stage("lock", e)),
        }
    }
}

impl Drop for RootLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_tracks_content_and_names() {
        let tmp = tempfile::tempdir().unwrap();
        let d = tmp.path().join("d");
        std::fs::create_dir_all(d.join("sub")).unwrap();
        std::fs::write(d.join("a"), b"1").unwrap();
        std::fs::write(d.join("sub/b"), b"2").unwrap();
        let first = digest_path(&d).unwrap().unwrap();
        assert_eq!(digest_path(&d).unwrap().unwrap(), first);
        std::fs::write(d.join("sub/b"), b"3").unwrap();
        let changed = digest_path(&d).unwrap().unwrap();
        assert_ne!(changed, first);
        std::fs::write(d.join("sub/b"), b"2").unwrap();
        assert_eq!(digest_path(&d).unwrap().unwrap(), first);
        std::fs::rename(d.join("a"), d.join("c")).unwrap();
        assert_ne!(digest_path(&d).unwrap().unwrap(), first);
        assert_eq!(digest_path(&tmp.path().join("missing")).unwrap(), None);
        assert_eq!(digest_path(&d.join("a")).unwrap(), None);
        assert_eq!(
            digest_path(&d.join("c")).unwrap().unwrap(),
            "6b86b273ff34fce19d6b804eff5a3f5747ada4eaa22f1d49c01e52ddb7875b4b"
        );
    }

    #[test]
    fn ledger_appends() {
        let tmp = tempfile::tempdir().unwrap();
        let ledger = RunLedger::new(tmp.path());
        assert!(ledger.entries().unwrap().is_empty());
        let mut e = LedgerEntry {
            stage: "ingest".into(),
            status: StageStatus::Ok,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            started: 1.0,
            finished: 2.0,
            tool_version: TOOL_VERSION.into(),
            error: None,
        };
        ledger.append(&e).unwrap();
        e.status = StageStatus::Failed;
        ledger.append(&e).unwrap();
        assert_eq!(ledger.entries().unwrap().len(), 2);
        assert_eq!(ledger.last_ok("ingest").unwrap().unwrap().status, StageStatus::Ok);
        assert!(ledger.last_ok("crop").unwrap().is_none());
    }

    #[test]
    fn lock_is_exclusive() {
        let tmp = tempfile::tempdir().unwrap();
        let lock = RootLock::acquire(tmp.path()).unwrap();
        assert!(matches!(RootLock::acquire(tmp.path()), Err(CliError::Locked(_))));
        drop(lock);
        RootLock::acquire(tmp.path()).unwrap();
    }
}
