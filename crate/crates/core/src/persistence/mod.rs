//! Event-sourced durability: a hash-chained, line-delimited log of canonical
//! JSON entries plus periodic state snapshots.
//!
//! `events.log` holds one entry per line. Each entry's `prev_digest` is the
//! hex SHA-256 of the previous line's bytes (without the newline); the first
//! entry carries 64 zeros. Snapshots are `snapshot-<seq>.json` files holding
//! the state digest observed live after entry `seq` was acknowledged.

mod snapshot;

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::canonical::{sha256_hex, to_canonical_string};
use crate::domain::{Error, ErrorCode, Result};

pub use snapshot::{list_snapshots, read_snapshot, write_snapshot, Snapshot};

pub const GENESIS_DIGEST: &str = "0000000000000000000000000000000000000000000000000000000000000000";
pub const LOG_FILE: &str = "events.log";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventLogEntry {
    pub seq: u64,
    pub tick: u64,
    pub op: String,
    pub payload: Value,
    pub prev_digest: String,
}

impl EventLogEntry {
    pub fn to_line(&self) -> String {
        to_canonical_string(self)
    }

    /// Digest of this entry's line, i.e. the next entry's `prev_digest`.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_line().as_bytes())
    }
}

/// How [`read_log`] treats a final line that lacks its newline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailPolicy {
    /// A partial final entry is corruption.
    Strict,
    /// A partial final entry was never acknowledged and is dropped.
    DropPartial,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogContents {
    pub entries: Vec<EventLogEntry>,
    /// Byte length of the well-formed prefix.
    pub valid_len: u64,
    /// Set when a partial final entry was dropped.
    pub dropped_tail_bytes: Option<u64>,
}

/// Parses and chain-verifies a log. Errors name the first offending seq.
pub fn parse_log(raw: &[u8], policy: TailPolicy) -> Result<LogContents> {
    let mut entries: Vec<EventLogEntry> = Vec::new();
    let mut prev = GENESIS_DIGEST.to_owned();
    let mut offset = 0usize;
    let mut dropped = None;
    while offset < raw.len() {
        let expected_seq = entries.len() as u64 + 1;
        let Some(nl) = raw[offset..].iter().position(|b| *b == b'\n') else {
            match policy {
                TailPolicy::Strict => {
                    return Err(Error::replay(expected_seq, "entry truncated mid-line"));
                }
                TailPolicy::DropPartial => {
                    dropped = Some((raw.len() - offset) as u64);
                    break;
                }
            }
        };
        let line = &raw[offset..offset + nl];
        let entry: EventLogEntry = std::str::from_utf8(line)
            .ok()
            .and_then(|text| serde_json::from_str(text).ok())
            .ok_or_else(|| Error::replay(expected_seq, "entry is not valid JSON"))?;
        if entry.to_line().as_bytes() != line {
            return Err(Error::replay(expected_seq, "entry is not in canonical form"));
        }
        if entry.seq != expected_seq {
            return Err(Error::replay(
                expected_seq,
                format!("found seq {} where {expected_seq} was expected", entry.seq),
            ));
        }
        if entry.prev_digest != prev {
            // The previous line no longer hashes to what this entry recorded.
            return Err(Error::replay(expected_seq - 1, "entry bytes do not match the chain"));
        }
        prev = sha256_hex(line);
        entries.push(entry);
        offset += nl + 1;
    }
    Ok(LogContents {
        entries,
        valid_len: offset as u64,
        dropped_tail_bytes: dropped,
    })
}

pub fn read_log(path: &Path, policy: TailPolicy) -> Result<LogContents> {
    let raw = match fs::read(path) {
        Ok(raw) => raw,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(io_error(path, e)),
    };
    parse_log(&raw, policy)
}

pub(crate) fn io_error(path: &Path, e: io::Error) -> Error {
    Error::new(ErrorCode::ReplayError, format!("{}: {e}", path.display()))
}

#[derive(Debug)]
enum Sink {
    Memory(Vec<EventLogEntry>),
    File { path: PathBuf, file: File },
}

/// Append side of the log. Refuses any entry that would break the chain.
#[derive(Debug)]
pub struct EventLog {
    sink: Sink,
    last_seq: u64,
    last_digest: String,
}

impl EventLog {
    pub fn in_memory() -> Self {
        EventLog {
            sink: Sink::Memory(Vec::new()),
            last_seq: 0,
            last_digest: GENESIS_DIGEST.to_owned(),
        }
    }

    /// Opens `path` for appending after `contents` (as returned by
    /// [`read_log`]), cutting off any dropped partial tail.
    pub fn open_file(path: &Path, contents: &LogContents) -> Result<Self> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| io_error(path, e))?;
        if contents.dropped_tail_bytes.is_some() {
            file.set_len(contents.valid_len).map_err(|e| io_error(path, e))?;
            file.sync_all().map_err(|e| io_error(path, e))?;
        }
        Ok(EventLog {
            sink: Sink::File {
                path: path.to_owned(),
                file,
            },
            last_seq: contents.entries.len() as u64,
            last_digest: contents
                .entries
                .last()
                .map_or_else(|| GENESIS_DIGEST.to_owned(), EventLogEntry::digest),
        })
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn last_digest(&self) -> &str {
        &self.last_digest
    }

    /// Builds the entry that would be appended next.
    pub fn next_entry(&self, tick: u64, op: impl Into<String>, payload: Value) -> EventLogEntry {
        EventLogEntry {
            seq: self.last_seq + 1,
            tick,
            op: op.into(),
            payload,
            prev_digest: self.last_digest.clone(),
        }
    }

    /// Appends `entry`; for file logs the call returns only after the line
    /// is synced to disk.
    pub fn append(&mut self, entry: EventLogEntry) -> Result<()> {
        if entry.seq != self.last_seq + 1 {
            return Err(Error::replay(
                entry.seq,
                format!("append out of order, next seq is {}", self.last_seq + 1),
            ));
        }
        if entry.prev_digest != self.last_digest {
            return Err(Error::replay(entry.seq, "prev_digest does not match the chain head"));
        }
        let line = entry.to_line();
        let digest = sha256_hex(line.as_bytes());
        match &mut self.sink {
            Sink::Memory(entries) => entries.push(entry),
            Sink::File { path, file } => {
                let mut buf = line.into_bytes();
                buf.push(b'\n');
                file.write_all(&buf)
                    .and_then(|_| file.sync_data())
                    .map_err(|e| io_error(path, e))?;
            }
        }
        self.last_seq += 1;
        self.last_digest = digest;
        Ok(())
    }

    /// Entries held by an in-memory log; `None` for file logs.
    pub fn memory_entries(&self) -> Option<&[EventLogEntry]> {
        match &self.sink {
            Sink::Memory(entries) => Some(entries),
            Sink::File { .. } => None,
        }
    }

    pub fn path(&self) -> Option<&Path> {
        match &self.sink {
            Sink::Memory(_) => None,
            Sink::File { path, .. } => Some(path),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn log_with(n: u64) -> EventLog {
        let mut log = EventLog::in_memory();
        for i in 0..n {
            let e = log.next_entry(i, "noop", json!({"i": i}));
            log.append(e).unwrap();
        }
        log
    }

    fn to_bytes(entries: &[EventLogEntry]) -> Vec<u8> {
        entries
            .iter()
            .flat_map(|e| {
                let mut line = e.to_line().into_bytes();
                line.push(b'\n');
                line
            })
            .collect()
    }

    #[test]
    fn genesis_entry() {
        let log = EventLog::in_memory();
        let e = log.next_entry(0, "noop", json!({}));
        assert_eq!(e.seq, 1);
        assert_eq!(e.prev_digest, GENESIS_DIGEST);
        assert_eq!(e.prev_digest.len(), 64);
    }

    #[test]
    fn refuses_gaps_and_bad_links() {
        let mut log = log_with(2);
        let mut gap = log.next_entry(0, "noop", json!({}));
        gap.seq = 4;
        assert_eq!(log.append(gap).unwrap_err().code, ErrorCode::ReplayError);
        let mut bad = log.next_entry(0, "noop", json!({}));
        bad.prev_digest = GENESIS_DIGEST.into();
        assert_eq!(log.append(bad).unwrap_err().code, ErrorCode::ReplayError);
        assert_eq!(log.last_seq(), 2);
    }

    #[test]
    fn parse_round_trip() {
        let log = log_with(5);
        let raw = to_bytes(log.memory_entries().unwrap());
        let contents = parse_log(&raw, TailPolicy::Strict).unwrap();
        assert_eq!(contents.entries, log.memory_entries().unwrap());
        assert_eq!(parse_log(b"", TailPolicy::Strict).unwrap().entries.len(), 0);
    }

    #[test]
    fn flipped_byte_names_its_entry() {
        let log = log_with(30);
        let entries = log.memory_entries().unwrap();
        let mut raw = to_bytes(entries);
        // Turn entry 17's {"i":16} into {"i":96}.
        let start: usize = to_bytes(&entries[..16]).len();
        let line_len = entries[16].to_line().len();
        let pos = start
            + entries[16].to_line().find("\"i\":16").unwrap()
            + 4;
        assert!(pos < start + line_len);
        raw[pos] = b'9';
        let err = parse_log(&raw, TailPolicy::Strict).unwrap_err();
        assert_eq!(err.code, ErrorCode::ReplayError);
        assert!(err.message.starts_with("seq 17:"), "{}", err.message);
    }

    #[test]
    fn garbage_byte_names_its_entry() {
        let log = log_with(20);
        let entries = log.memory_entries().unwrap();
        let mut raw = to_bytes(entries);
        let start: usize = to_bytes(&entries[..16]).len();
        raw[start] = b'#';
        let err = parse_log(&raw, TailPolicy::Strict).unwrap_err();
        assert!(err.message.starts_with("seq 17:"), "{}", err.message);
    }

    #[test]
    fn partial_tail() {
        let log = log_with(3);
        let mut raw = to_bytes(log.memory_entries().unwrap());
        let whole = raw.len();
        raw.extend_from_slice(b"{\"op\":\"no");
        let err = parse_log(&raw, TailPolicy::Strict).unwrap_err();
        assert!(err.message.starts_with("seq 4:"));
        let recovered = parse_log(&raw, TailPolicy::DropPartial).unwrap();
        assert_eq!(recovered.entries.len(), 3);
        assert_eq!(recovered.valid_len, whole as u64);
        assert_eq!(recovered.dropped_tail_bytes, Some(9));
        // Truncation exactly at an entry boundary is a shorter valid log.
        let clean = parse_log(&raw[..whole], TailPolicy::Strict).unwrap();
        assert_eq!(clean.entries.len(), 3);
    }

    #[test]
    fn file_log_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LOG_FILE);
        {
            let contents = read_log(&path, TailPolicy::Strict).unwrap();
            let mut log = EventLog::open_file(&path, &contents).unwrap();
            for i in 0..3 {
                let e = log.next_entry(i, "noop", json!({"i": i}));
                log.append(e).unwrap();
            }
        }
        let contents = read_log(&path, TailPolicy::Strict).unwrap();
        assert_eq!(contents.entries.len(), 3);
        let mut log = EventLog::open_file(&path, &contents).unwrap();
        let e = log.next_entry(9, "noop", json!({}));
        assert_eq!(e.seq, 4);
        log.append(e).unwrap();
        assert_eq!(read_log(&path, TailPolicy::Strict).unwrap().entries.len(), 4);
    }

    #[test]
    fn reopen_cuts_partial_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(LOG_FILE);
        let log = log_with(2);
        let mut raw = to_bytes(log.memory_entries().unwrap());
        raw.extend_from_slice(b"{\"partial");
        fs::write(&path, &raw).unwrap();
        let contents = read_log(&path, TailPolicy::DropPartial).unwrap();
        let mut log = EventLog::open_file(&path, &contents).unwrap();
        let e = log.next_entry(0, "noop", json!({}));
        log.append(e).unwrap();
        assert_eq!(read_log(&path, TailPolicy::Strict).unwrap().entries.len(), 3);
    }
}
