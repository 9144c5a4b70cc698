use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::io_error;
use crate::canonical::{state_digest, to_canonical_vec};
use crate::domain::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub seq: u64,
    /// State digest after entry `seq`.
    pub digest: String,
    /// Digest of log entry `seq`, tying the snapshot to one exact history.
    pub log_digest: String,
    pub state: Value,
}

fn snapshot_path(dir: &Path, seq: u64) -> PathBuf {
    dir.join(format!("snapshot-{seq}.json"))
}

pub fn write_snapshot(dir: &Path, snapshot: &Snapshot) -> Result<PathBuf> {
    let path = snapshot_path(dir, snapshot.seq);
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, to_canonical_vec(snapshot)).map_err(|e| io_error(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| io_error(&path, e))?;
    Ok(path)
}

/// Reads a snapshot and checks its state still hashes to its digest.
pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let raw = fs::read(path).map_err(|e| io_error(path, e))?;
    let snapshot: Snapshot = serde_json::from_slice(&raw)
        .map_err(|e| Error::replay(0, format!("{}: {e}", path.display())))?;
    if state_digest(&snapshot.state) != snapshot.digest {
        return Err(Error::replay(
            snapshot.seq,
            format!("{} does not match its recorded digest", path.display()),
        ));
    }
    Ok(snapshot)
}

/// Snapshot sequence numbers present in `dir`, ascending.
pub fn list_snapshots(dir: &Path) -> Result<Vec<(u64, PathBuf)>> {
    let mut found = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_error(dir, e))? {
        let path = entry.map_err(|e| io_error(dir, e))?.path();
        let seq = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("snapshot-"))
            .and_then(|n| n.strip_suffix(".json"))
            .and_then(|n| n.parse::<u64>().ok());
        if let Some(seq) = seq {
            found.push((seq, path));
        }
    }
    found.sort();
    Ok(found)
}
