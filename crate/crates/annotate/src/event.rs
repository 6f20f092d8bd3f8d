use serde::{Deserialize, Serialize};

use sarquant::Category;

/// A sentence as submitted for annotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewSentence {
    pub id: String,
    pub text: String,
    pub category: Category,
}

/// An accepted state change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Import { sentences: Vec<NewSentence> },
    Vote { annotator: String, sentence_id: String, value: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Import,
    Vote,
}

#[derive(Serialize, Deserialize)]
struct ImportPayload {
    sentences: Vec<NewSentence>,
}

#[derive(Serialize, Deserialize)]
struct VotePayload {
    annotator: String,
    sentence_id: String,
    value: bool,
}

/// One line of the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub seq: u64,
    pub kind: EventKind,
    pub payload: serde_json::Value,
    pub ts: String,
}

impl LogEntry {
    pub fn new(seq: u64, event: &Event, ts: String) -> Self {
        let (kind, payload) = match event {
            Event::Import { sentences } => (
                EventKind::Import,
                serde_json::to_value(ImportPayload {
                    sentences: sentences.clone(),
                }),
            ),
            Event::Vote {
                annotator,
                sentence_id,
                value,
            } => (
                EventKind::Vote,
                serde_json::to_value(VotePayload {
                    annotator: annotator.clone(),
                    sentence_id: sentence_id.clone(),
                    value: *value,
                }),
            ),
        };
        Self {
            seq,
            kind,
            payload: payload.expect("payload serializes"),
            ts,
        }
    }

    pub fn event(&self) -> Result<Event, serde_json::Error> {
        Ok(match self.kind {
            EventKind::Import => {
                let p: ImportPayload = serde_json::from_value(self.payload.clone())?;
                Event::Import {
                    sentences: p.sentences,
                }
            }
            EventKind::Vote => {
                let p: VotePayload = serde_json::from_value(self.payload.clone())?;
                Event::Vote {
                    annotator: p.annotator,
                    sentence_id: p.sentence_id,
                    value: p.value,
                }
            }
        })
    }
}
