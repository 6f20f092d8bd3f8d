//! Append-only JSON Lines event log.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};

use crate::event::{Event, LogEntry};
use crate::state::State;

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("event log line {line}: unreadable entry (truncated or corrupt): {reason}")]
    Corrupt { line: usize, reason: String },
    #[error("event log line {line}: expected seq {expected}, found seq {found}")]
    Sequence { line: usize, expected: u64, found: u64 },
    #[error("event log seq {seq}: event rejected on replay: {reason}")]
    Rejected { seq: u64, reason: String },
    #[error("event log line {line}: final entry is not newline-terminated (truncated write)")]
    Truncated { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Rebuild state from a log. Sequence numbers must run 1, 2, 3, ... and
/// every event must be valid against the state built so far.
pub fn replay<R: BufRead>(mut reader: R, quorum: usize) -> Result<(State, u64), ReplayError> {
    let mut state = State::new(quorum);
    let mut last_seq = 0;
    let mut line_no = 0;
    let mut buf = String::new();
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        line_no += 1;
        let complete = buf.ends_with('\n');
        let line = buf.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry = match serde_json::from_str(line) {
            Ok(entry) => entry,
            Err(e) => {
                return Err(ReplayError::Corrupt {
                    line: line_no,
                    reason: e.to_string(),
                })
            }
        };
        if !complete {
            return Err(ReplayError::Truncated { line: line_no });
        }
        if entry.seq != last_seq + 1 {
            return Err(ReplayError::Sequence {
                line: line_no,
                expected: last_seq + 1,
                found: entry.seq,
            });
        }
        let event = entry.event().map_err(|e| ReplayError::Corrupt {
            line: line_no,
            reason: e.to_string(),
        })?;
        state.check(&event).map_err(|e| ReplayError::Rejected {
            seq: entry.seq,
            reason: e.to_string(),
        })?;
        state.apply(&event);
        last_seq = entry.seq;
    }
    Ok((state, last_seq))
}

/// Writer half of the log. Appends are flushed and synced before returning.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
    last_seq: u64,
}

impl EventLog {
    /// Open (creating if needed) and replay the log at `path`.
    pub fn open(path: &Path, quorum: usize) -> Result<(Self, State), ReplayError> {
        let file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(path)?;
        let (state, last_seq) = replay(BufReader::new(&file), quorum)?;
        Ok((
            Self {
                path: path.to_owned(),
                file,
                last_seq,
            },
            state,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn append(&mut self, event: &Event) -> std::io::Result<LogEntry> {
        let entry = LogEntry::new(
            self.last_seq + 1,
            event,
            Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        );
        let mut line = serde_json::to_string(&entry).expect("log entry serializes");
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.last_seq = entry.seq;
        Ok(entry)
    }
}
