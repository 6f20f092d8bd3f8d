//! Annotation collection service.
//!
//! Sentences are imported, handed out to annotators one at a time, and
//! collect one binary judgment per annotator until the quorum is reached.
//! The append-only event log is the only durable state; the in-memory view is
//! rebuilt from it on start.

mod event;
pub mod http;
mod log;
mod state;

use std::path::Path;
use std::sync::{Mutex, RwLock};

use sarquant::Category;
use serde_json::Value;

pub use event::{Event, EventKind, LogEntry, NewSentence};
pub use log::{replay, EventLog, ReplayError};
pub use state::{Progress, Sentence, State, Status};

/// File name of the event log inside the data directory.
pub const LOG_FILE: &str = "events.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown sentence {0:?}")]
    NotFound(String),
    #[error("annotator already voted on this sentence")]
    DuplicateVote,
    #[error("sentence already has a full quorum of votes")]
    Complete,
    #[error("duplicate sentence id {0:?}")]
    DuplicateId(String),
    #[error("invalid request: {0}")]
    Validation(String),
    #[error("event log write failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Handed to an annotator.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Task {
    pub sentence_id: String,
    pub text: String,
    pub category: Category,
}

/// Parse a JSON Lines import body of `{"id","text","category"}` objects.
pub fn parse_import(body: &str) -> Result<Vec<NewSentence>, ServiceError> {
    let mut sentences = Vec::new();
    for (idx, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| ServiceError::Validation(format!("line {}: {msg}", idx + 1));
        let value: Value = serde_json::from_str(line).map_err(|e| bad(&e.to_string()))?;
        let field = |name: &str| -> Result<String, ServiceError> {
            value
                .get(name)
                .and_then(Value::as_str)
                .map(str::to_owned)
                .ok_or_else(|| bad(&format!("missing string field `{name}`")))
        };
        let id = field("id")?;
        if id.is_empty() {
            return Err(bad("empty id"));
        }
        sentences.push(NewSentence {
            id,
            text: field("text")?,
            category: Category::parse(&field("category")?),
        });
    }
    Ok(sentences)
}

struct Writer {
    log: EventLog,
}

/// Shared service handle. Mutations are serialized through the log writer;
/// reads only take the state read lock.
pub struct AnnotationService {
    writer: Mutex<Writer>,
    state: RwLock<State>,
}

impl AnnotationService {
    /// Open the service over `data_dir`, replaying any existing log.
    pub fn open(data_dir: &Path, quorum: usize) -> Result<Self, ReplayError> {
        std::fs::create_dir_all(data_dir)?;
        let (log, state) = EventLog::open(&data_dir.join(LOG_FILE), quorum)?;
        tracing::info!(
            path = %log.path().display(),
            events = log.last_seq(),
            sentences = state.sentences().len(),
            "event log replayed"
        );
        Ok(Self {
            writer: Mutex::new(Writer { log }),
            state: RwLock::new(state),
        })
    }

    pub fn quorum(&self) -> usize {
        self.read().quorum()
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().unwrap_or_else(|e| e.into_inner())
    }

    /// Validate, log durably, then apply.
    fn commit(&self, event: Event) -> Result<(), ServiceError> {
        let mut writer = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        self.read().check(&event)?;
        writer.log.append(&event)?;
        self.state
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .apply(&event);
        Ok(())
    }

    pub fn import_sentences(&self, sentences: Vec<NewSentence>) -> Result<usize, ServiceError> {
        let n = sentences.len();
        if n == 0 {
            return Ok(0);
        }
        self.commit(Event::Import { sentences })?;
        Ok(n)
    }

    pub fn import_jsonl(&self, body: &str) -> Result<usize, ServiceError> {
        self.import_sentences(parse_import(body)?)
    }

    pub fn next_task(&self, annotator: &str) -> Result<Option<Task>, ServiceError> {
        if annotator.trim().is_empty() {
            return Err(ServiceError::Validation("empty annotator name".into()));
        }
        Ok(self.read().next_task(annotator).map(|s| Task {
            sentence_id: s.id.clone(),
            text: s.text.clone(),
            category: s.category,
        }))
    }

    pub fn submit_vote(&self, annotator: &str, sentence_id: &str, value: bool) -> Result<(), ServiceError> {
        self.commit(Event::Vote {
            annotator: annotator.to_owned(),
            sentence_id: sentence_id.to_owned(),
            value,
        })
    }

    pub fn progress(&self) -> Progress {
        self.read().progress()
    }

    pub fn export_jsonl(&self, include_partial: bool) -> String {
        self.read().export_jsonl(include_partial)
    }

    /// Copy of the current state.
    pub fn snapshot(&self) -> State {
        self.read().clone()
    }
}
