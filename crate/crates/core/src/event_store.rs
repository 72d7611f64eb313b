//! Append-only event log and state snapshots.
//!
//! The log holds one JSON object per line:
//!
//! ```text
//! {"crc":"3f1a09bc","record":{"sequence":1,"at":"2013-01-02T16:00:00Z","payload":{"type":"player_registered",...}}}
//! ```
//!
//! `crc` is the CRC-32 of the exact `record` bytes, so a damaged line is
//! detected on its own. Sequence numbers start at 1 and are contiguous;
//! timestamps never decrease.
//!
//! Snapshots are single JSON files named `snapshot-<sequence>.json` holding a
//! format version, the covering sequence number, a CRC-32 of the state bytes
//! and the state itself.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::game::{fold_events, Event, EventPayload, GameError, GameState};
use crate::model::Timestamp;

pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("event {sequence}: corrupt record: {reason}")]
    Corrupt { sequence: u64, reason: String },
    #[error("event {sequence}: {source}")]
    Apply { sequence: u64, source: GameError },
    #[error("event time {at} is earlier than the last logged event at {last}")]
    TimestampRegression { at: Timestamp, last: Timestamp },
    #[error("snapshot {path}: unsupported version {found} (expected {SNAPSHOT_VERSION})")]
    SnapshotVersion { path: PathBuf, found: u32 },
    #[error("snapshot {path}: checksum mismatch")]
    SnapshotChecksum { path: PathBuf },
    #[error("snapshot {path}: {reason}")]
    SnapshotFormat { path: PathBuf, reason: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

fn crc_hex(bytes: &[u8]) -> String {
    format!("{:08x}", crc32fast::hash(bytes))
}

#[derive(Serialize)]
struct LineOut<'a> {
    crc: String,
    record: &'a RawValue,
}

#[derive(Deserialize)]
struct LineIn<'a> {
    crc: String,
    #[serde(borrow)]
    record: &'a RawValue,
}

pub fn encode_event(event: &Event) -> String {
    let record = serde_json::to_string(event).expect("events always serialize");
    let raw = RawValue::from_string(record).expect("serde_json output is valid JSON");
    serde_json::to_string(&LineOut { crc: crc_hex(raw.get().as_bytes()), record: &raw }).expect("line serializes")
}

/// Decodes one log line, checking its checksum and that it carries
/// `expected` as its sequence number.
pub fn decode_event(line: &str, expected: u64) -> Result<Event, StoreError> {
    let corrupt = |reason: String| StoreError::Corrupt { sequence: expected, reason };
    let parsed: LineIn<'_> = serde_json::from_str(line).map_err(|e| corrupt(e.to_string()))?;
    if crc_hex(parsed.record.get().as_bytes()) != parsed.crc {
        return Err(corrupt("checksum mismatch".into()));
    }
    let event: Event = serde_json::from_str(parsed.record.get()).map_err(|e| corrupt(e.to_string()))?;
    if event.sequence != expected {
        return Err(corrupt(format!("found sequence {} where {expected} was expected", event.sequence)));
    }
    Ok(event)
}

/// Reads and verifies every event in the log. A missing file is an empty log.
pub fn read_events(path: &Path) -> Result<Vec<Event>, StoreError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut events: Vec<Event> = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let expected = events.len() as u64 + 1;
        let event = decode_event(line, expected)?;
        if let Some(prev) = events.last() {
            if event.at < prev.at {
                return Err(StoreError::Corrupt { sequence: expected, reason: "timestamp regression".into() });
            }
        }
        events.push(event);
    }
    Ok(events)
}

/// Materializes the state after event `up_to` (or the end of the log).
pub fn replay(path: &Path, up_to: Option<u64>) -> Result<GameState, StoreError> {
    let events = read_events(path)?;
    fold(GameState::default(), &events, up_to)
}

pub fn fold(state: GameState, events: &[Event], up_to: Option<u64>) -> Result<GameState, StoreError> {
    fold_events(state, events, up_to).map_err(|(sequence, source)| StoreError::Apply { sequence, source })
}

/// Writer half of the log. Appends are flushed to disk before returning.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    last_sequence: u64,
    last_at: Option<Timestamp>,
}

impl EventLog {
    /// Opens (creating if needed) the log and returns it with its events.
    pub fn open(path: impl Into<PathBuf>) -> Result<(Self, Vec<Event>), StoreError> {
        let path = path.into();
        let events = read_events(&path)?;
        let file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        let log = Self {
            last_sequence: events.last().map_or(0, |e| e.sequence),
            last_at: events.last().map(|e| e.at),
            path,
            file,
        };
        Ok((log, events))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> u64 {
        self.last_sequence
    }

    pub fn is_empty(&self) -> bool {
        self.last_sequence == 0
    }

    pub fn last_at(&self) -> Option<Timestamp> {
        self.last_at
    }

    pub fn append(&mut self, payload: EventPayload, at: Timestamp) -> Result<Event, StoreError> {
        let mut events = self.append_all(vec![(at, payload)])?;
        Ok(events.pop().expect("one event appended"))
    }

    /// Appends several events with a single write and flush.
    pub fn append_all(&mut self, batch: Vec<(Timestamp, EventPayload)>) -> Result<Vec<Event>, StoreError> {
        let mut last_at = self.last_at;
        let mut sequence = self.last_sequence;
        let mut events = Vec::with_capacity(batch.len());
        let mut buf = String::new();
        for (at, payload) in batch {
            if let Some(last) = last_at {
                if at < last {
                    return Err(StoreError::TimestampRegression { at, last });
                }
            }
            sequence += 1;
            last_at = Some(at);
            let event = Event { sequence, at, payload };
            buf.push_str(&encode_event(&event));
            buf.push('\n');
            events.push(event);
        }
        if events.is_empty() {
            return Ok(events);
        }
        self.file.write_all(buf.as_bytes()).map_err(io_err(&self.path))?;
        self.file.sync_data().map_err(io_err(&self.path))?;
        self.last_sequence = sequence;
        self.last_at = last_at;
        Ok(events)
    }
}

/// A log paired with the state it materializes. Payloads are checked against
/// the state before they are written, so the log only ever holds events that
/// replay cleanly.
#[derive(Debug)]
pub struct Journal {
    log: EventLog,
    state: GameState,
}

impl Journal {
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let (log, events) = EventLog::open(path)?;
        let state = fold(GameState::default(), &events, None)?;
        Ok(Self { log, state })
    }

    /// Like [`Journal::open`], but starts from the newest snapshot in
    /// `snapshots` that loads cleanly.
    pub fn open_with_snapshots(path: impl Into<PathBuf>, snapshots: &Path) -> Result<Self, StoreError> {
        let (log, events) = EventLog::open(path)?;
        let mut state = None;
        for (seq, snap) in list_snapshots(snapshots)? {
            if seq > events.len() as u64 {
                continue;
            }
            if let Ok(loaded) = load_snapshot(&snap) {
                state = Some(fold(loaded, &events[seq as usize..], None)?);
                break;
            }
        }
        let state = match state {
            Some(s) => s,
            None => fold(GameState::default(), &events, None)?,
        };
        Ok(Self { log, state })
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    /// Records a batch atomically with respect to validation: the whole batch
    /// is checked against a scratch copy of the state before anything is
    /// written.
    pub fn record_all(&mut self, batch: Vec<(Timestamp, EventPayload)>) -> Result<Vec<Event>, StoreError> {
        let mut scratch = self.state.clone();
        for (at, payload) in &batch {
            let sequence = scratch.next_sequence();
            let event = Event { sequence, at: *at, payload: payload.clone() };
            scratch.apply(&event).map_err(|source| StoreError::Apply { sequence, source })?;
        }
        let events = self.log.append_all(batch)?;
        self.state = scratch;
        Ok(events)
    }

    pub fn record(&mut self, payload: EventPayload, at: Timestamp) -> Result<Event, StoreError> {
        let sequence = self.state.next_sequence();
        let reject = |source| StoreError::Apply { sequence, source };
        self.state.check_time(at).map_err(reject)?;
        self.state.check(&payload).map_err(reject)?;
        let event = self.log.append(payload, at)?;
        self.state.apply(&event).map_err(|source| StoreError::Apply { sequence: event.sequence, source })?;
        Ok(event)
    }
}

#[derive(Serialize)]
struct SnapshotOut<'a> {
    version: u32,
    sequence: u64,
    crc: String,
    state: &'a RawValue,
}

#[derive(Deserialize)]
struct SnapshotIn<'a> {
    version: u32,
    sequence: u64,
    crc: String,
    #[serde(borrow)]
    state: &'a RawValue,
}

pub fn snapshot_file_name(sequence: u64) -> String {
    format!("snapshot-{sequence:012}.json")
}

/// Writes `state` into `dir` and returns the snapshot path.
pub fn write_snapshot(dir: &Path, state: &GameState) -> Result<PathBuf, StoreError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let body = serde_json::to_string(state).expect("state serializes");
    let raw = RawValue::from_string(body).expect("serde_json output is valid JSON");
    let doc = SnapshotOut {
        version: SNAPSHOT_VERSION,
        sequence: state.last_sequence,
        crc: crc_hex(raw.get().as_bytes()),
        state: &raw,
    };
    let path = dir.join(snapshot_file_name(state.last_sequence));
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, serde_json::to_vec(&doc).expect("snapshot serializes")).map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(path)
}

pub fn load_snapshot(path: &Path) -> Result<GameState, StoreError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let format = |reason: String| StoreError::SnapshotFormat { path: path.to_path_buf(), reason };
    let doc: SnapshotIn<'_> = serde_json::from_slice(&bytes).map_err(|e| format(e.to_string()))?;
    if doc.version != SNAPSHOT_VERSION {
        return Err(StoreError::SnapshotVersion { path: path.to_path_buf(), found: doc.version });
    }
    if crc_hex(doc.state.get().as_bytes()) != doc.crc {
        return Err(StoreError::SnapshotChecksum { path: path.to_path_buf() });
    }
    let state: GameState = serde_json::from_str(doc.state.get()).map_err(|e| format(e.to_string()))?;
    if state.last_sequence != doc.sequence {
        return Err(format("covering sequence disagrees with state".into()));
    }
    Ok(state)
}

/// Snapshots in `dir`, newest (highest sequence) first.
pub fn list_snapshots(dir: &Path) -> Result<Vec<(u64, PathBuf)>, StoreError> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(dir)(e)),
    };
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(io_err(dir))?;
        let name = entry.file_name();
        let Some(seq) = name
            .to_str()
            .and_then(|n| n.strip_prefix("snapshot-"))
            .and_then(|n| n.strip_suffix(".json"))
            .and_then(|n| n.parse::<u64>().ok())
        else {
            continue;
        };
        out.push((seq, entry.path()));
    }
    out.sort_by_key(|s| std::cmp::Reverse(s.0));
    Ok(out)
}

/// Replays the log, starting from the newest usable snapshot at or below
/// `up_to`. Snapshots that fail to load are skipped in favour of older ones
/// or a full replay.
pub fn replay_with_snapshots(log: &Path, snapshots: &Path, up_to: Option<u64>) -> Result<GameState, StoreError> {
    let events = read_events(log)?;
    for (seq, path) in list_snapshots(snapshots)? {
        if up_to.is_some_and(|limit| seq > limit) || seq > events.len() as u64 {
            continue;
        }
        if let Ok(state) = load_snapshot(&path) {
            return fold(state, &events[seq as usize..], up_to);
        }
    }
    fold(GameState::default(), &events, up_to)
}
