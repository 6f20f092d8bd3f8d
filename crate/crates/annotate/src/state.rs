//! In-memory annotation state: a pure fold over the event log.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::Serialize;

use sarquant::corpus::{aggregate_label, labeled_example_line};
use sarquant::{Category, LabeledExample};

use crate::event::{Event, NewSentence};
use crate::ServiceError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Open,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    pub category: Category,
    /// Annotator name → judgment. Iterates in name order.
    pub votes: BTreeMap<String, bool>,
}

impl Sentence {
    pub fn yes_votes(&self) -> usize {
        self.votes.values().filter(|&&v| v).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub total_sentences: usize,
    pub complete: usize,
    pub total_votes: usize,
    pub per_annotator: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct State {
    quorum: usize,
    sentences: Vec<Sentence>,
    index: HashMap<String, usize>,
}

impl State {
    pub fn new(quorum: usize) -> Self {
        Self {
            quorum,
            sentences: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn quorum(&self) -> usize {
        self.quorum
    }

    pub fn sentences(&self) -> &[Sentence] {
        &self.sentences
    }

    pub fn get(&self, id: &str) -> Option<&Sentence> {
        self.index.get(id).map(|&i| &self.sentences[i])
    }

    pub fn status(&self, sentence: &Sentence) -> Status {
        if sentence.votes.len() >= self.quorum {
            Status::Complete
        } else {
            Status::Open
        }
    }

    /// Reject anything that would break an invariant. `apply` assumes this
    /// passed.
    pub fn check(&self, event: &Event) -> Result<(), ServiceError> {
        match event {
            Event::Import { sentences } => {
                let mut seen = HashSet::new();
                for s in sentences {
                    if s.id.is_empty() {
                        return Err(ServiceError::Validation("empty sentence id".into()));
                    }
                    if self.index.contains_key(&s.id) || !seen.insert(s.id.as_str()) {
                        return Err(ServiceError::DuplicateId(s.id.clone()));
                    }
                }
                Ok(())
            }
            Event::Vote {
                annotator,
                sentence_id,
                ..
            } => {
                if annotator.trim().is_empty() {
                    return Err(ServiceError::Validation("empty annotator name".into()));
                }
                let sentence = self
                    .get(sentence_id)
                    .ok_or_else(|| ServiceError::NotFound(sentence_id.clone()))?;
                if sentence.votes.contains_key(annotator) {
                    return Err(ServiceError::DuplicateVote);
                }
                if self.status(sentence) == Status::Complete {
                    return Err(ServiceError::Complete);
                }
                Ok(())
            }
        }
    }

    pub fn apply(&mut self, event: &Event) {
        match event {
            Event::Import { sentences } => {
                for NewSentence { id, text, category } in sentences {
                    self.index.insert(id.clone(), self.sentences.len());
                    self.sentences.push(Sentence {
                        id: id.clone(),
                        text: text.clone(),
                        category: *category,
                        votes: BTreeMap::new(),
                    });
                }
            }
            Event::Vote {
                annotator,
                sentence_id,
                value,
            } => {
                let idx = self.index[sentence_id];
                self.sentences[idx].votes.insert(annotator.clone(), *value);
            }
        }
    }

    /// Open sentence this annotator has not judged, fewest votes first, ties
    /// broken by import order.
    pub fn next_task(&self, annotator: &str) -> Option<&Sentence> {
        self.sentences
            .iter()
            .filter(|s| self.status(s) == Status::Open && !s.votes.contains_key(annotator))
            .min_by_key(|s| s.votes.len())
    }

    pub fn progress(&self) -> Progress {
        let mut per_annotator = BTreeMap::new();
        for s in &self.sentences {
            for name in s.votes.keys() {
                *per_annotator.entry(name.clone()).or_insert(0) += 1;
            }
        }
        Progress {
            total_sentences: self.sentences.len(),
            complete: self
                .sentences
                .iter()
                .filter(|s| self.status(s) == Status::Complete)
                .count(),
            total_votes: self.sentences.iter().map(|s| s.votes.len()).sum(),
            per_annotator,
        }
    }

    /// Aggregated examples in import order. Sentences without any vote are
    /// never exported.
    pub fn export(&self, include_partial: bool) -> Vec<LabeledExample> {
        self.sentences
            .iter()
            .filter_map(|s| {
                let complete = self.status(s) == Status::Complete;
                if !(complete || include_partial && !s.votes.is_empty()) {
                    return None;
                }
                let votes: Vec<u8> = s.votes.values().map(|&v| u8::from(v)).collect();
                Some(LabeledExample {
                    id: s.id.clone(),
                    text: s.text.clone(),
                    category: s.category,
                    label: aggregate_label(&votes).expect("non-empty binary votes"),
                    partial: !complete,
                })
            })
            .collect()
    }

    pub fn export_jsonl(&self, include_partial: bool) -> String {
        self.export(include_partial)
            .iter()
            .map(|e| labeled_example_line(e) + "\n")
            .collect()
    }
}
