//! Multi-annotator sarcasm corpora.
//!
//! A [`VoteRecord`] holds one sentence with `A` binary judgments. Aggregation
//! turns it into a [`LabeledExample`] whose label is the fraction of annotators
//! who judged the sentence sarcastic.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

/// Annotators per sentence when nothing else is configured.
pub const DEFAULT_QUORUM: usize = 11;

/// Default majority threshold for binary views: 6 of 11 annotators.
pub const DEFAULT_THRESHOLD: f64 = 6.0 / 11.0;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: malformed JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: expected a JSON object")]
    NotAnObject { line: usize },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: field `{field}` has the wrong type")]
    WrongType { line: usize, field: &'static str },
    #[error("line {line}: empty id")]
    EmptyId { line: usize },
    #[error("line {line}: vote count {got} ≠ quorum {quorum}")]
    VoteCount { line: usize, got: usize, quorum: usize },
    #[error("line {line}: non-binary vote at position {position}")]
    NonBinaryVote { line: usize, position: usize },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: label {label} outside [0, 1]")]
    LabelOutOfRange { line: usize, label: f64 },
    #[error("empty vote sequence")]
    EmptyVotes,
    #[error("vote value {0} is not binary")]
    NonBinary(u8),
    #[error("malformed label {0:?}")]
    MalformedLabel(String),
    #[error("label {numerator}/{denominator} exceeds quorum {quorum}")]
    LabelExceedsQuorum {
        numerator: u64,
        denominator: u64,
        quorum: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = CorpusError> = std::result::Result<T, E>;

/// Topic of a tweet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Politics,
    Entertainment,
    ProductsServices,
    Sports,
    Unknown,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Politics,
        Category::Entertainment,
        Category::ProductsServices,
        Category::Sports,
        Category::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Politics => "politics",
            Category::Entertainment => "entertainment",
            Category::ProductsServices => "products_services",
            Category::Sports => "sports",
            Category::Unknown => "unknown",
        }
    }

    /// Lenient parse: anything unrecognised becomes `Unknown` with a warning.
    pub fn parse(s: &str) -> Category {
        match s.trim().to_ascii_lowercase().as_str() {
            "politics" => Category::Politics,
            "entertainment" => Category::Entertainment,
            "products_services" | "products and services" | "products-services" => {
                Category::ProductsServices
            }
            "sports" => Category::Sports,
            "unknown" => Category::Unknown,
            other => {
                tracing::warn!(category = other, "unrecognised category, using `unknown`");
                Category::Unknown
            }
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One sentence with its per-annotator binary judgments (1 = sarcastic).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteRecord {
    pub id: String,
    pub text: String,
    pub category: Category,
    pub votes: Vec<u8>,
}

impl VoteRecord {
    pub fn yes_votes(&self) -> usize {
        self.votes.iter().filter(|&&v| v == 1).count()
    }

    pub fn to_labeled(&self) -> Result<LabeledExample> {
        Ok(LabeledExample {
            id: self.id.clone(),
            text: self.text.clone(),
            category: self.category,
            label: aggregate_label(&self.votes)?,
            partial: false,
        })
    }
}

/// Sentence with its aggregated sarcasm level in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub text: String,
    pub category: Category,
    pub label: f64,
    /// Set only on service exports of sentences that have not reached quorum.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub partial: bool,
}

fn parse_object(line: &str, line_no: usize) -> Result<Map<String, Value>> {
    match serde_json::from_str::<Value>(line) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(CorpusError::NotAnObject { line: line_no }),
        Err(source) => Err(CorpusError::Json {
            line: line_no,
            source,
        }),
    }
}

fn str_field<'a>(map: &'a Map<String, Value>, field: &'static str, line: usize) -> Result<&'a str> {
    match map.get(field) {
        None => Err(CorpusError::MissingField { line, field }),
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(CorpusError::WrongType { line, field }),
    }
}

fn id_field(map: &Map<String, Value>, line: usize) -> Result<String> {
    let id = str_field(map, "id", line)?;
    if id.is_empty() {
        return Err(CorpusError::EmptyId { line });
    }
    Ok(id.to_owned())
}

/// Parse one line of a votes file. `line_no` is 1-based and only used in errors.
pub fn parse_vote_record(line: &str, line_no: usize, quorum: usize) -> Result<VoteRecord> {
    let map = parse_object(line, line_no)?;
    let id = id_field(&map, line_no)?;
    let text = str_field(&map, "text", line_no)?.to_owned();
    let category = Category::parse(str_field(&map, "category", line_no)?);
    let raw = match map.get("votes") {
        None => {
            return Err(CorpusError::MissingField {
                line: line_no,
                field: "votes",
            })
        }
        Some(Value::Array(raw)) => raw,
        Some(_) => {
            return Err(CorpusError::WrongType {
                line: line_no,
                field: "votes",
            })
        }
    };
    if raw.len() != quorum {
        return Err(CorpusError::VoteCount {
            line: line_no,
            got: raw.len(),
            quorum,
        });
    }
    let votes = raw
        .iter()
        .enumerate()
        .map(|(i, v)| match v.as_u64() {
            Some(0) => Ok(0),
            Some(1) => Ok(1),
            _ => Err(CorpusError::NonBinaryVote {
                line: line_no,
                position: i + 1,
            }),
        })
        .collect::<Result<Vec<u8>>>()?;
    Ok(VoteRecord {
        id,
        text,
        category,
        votes,
    })
}

/// Read a whole votes file. Blank lines are skipped; duplicate ids are an error.
pub fn read_votes<R: BufRead>(reader: R, quorum: usize) -> Result<Vec<VoteRecord>> {
    let mut seen = HashSet::new();
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_vote_record(&line, idx + 1, quorum)?;
        if !seen.insert(record.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: idx + 1,
                id: record.id,
            });
        }
        records.push(record);
    }
    Ok(records)
}

/// Fraction of sarcastic votes.
pub fn aggregate_label(votes: &[u8]) -> Result<f64> {
    if votes.is_empty() {
        return Err(CorpusError::EmptyVotes);
    }
    if let Some(&bad) = votes.iter().find(|&&v| v > 1) {
        return Err(CorpusError::NonBinary(bad));
    }
    let yes = votes.iter().filter(|&&v| v == 1).count();
    Ok(yes as f64 / votes.len() as f64)
}

pub fn aggregate(records: &[VoteRecord]) -> Result<Vec<LabeledExample>> {
    records.iter().map(VoteRecord::to_labeled).collect()
}

/// Parse a label written as `"k/A"`, `"0"` or `"1"`.
pub fn parse_label_string(s: &str, quorum: usize) -> Result<f64> {
    let malformed = || CorpusError::MalformedLabel(s.to_owned());
    let s = s.trim();
    match s.split_once('/') {
        Some((num, den)) => {
            let numerator: u64 = num.trim().parse().map_err(|_| malformed())?;
            let denominator: u64 = den.trim().parse().map_err(|_| malformed())?;
            if denominator == 0 {
                return Err(malformed());
            }
            if numerator > denominator || denominator > quorum as u64 {
                return Err(CorpusError::LabelExceedsQuorum {
                    numerator,
                    denominator,
                    quorum,
                });
            }
            Ok(numerator as f64 / denominator as f64)
        }
        None => match s.parse::<u64>().map_err(|_| malformed())? {
            0 => Ok(0.0),
            1 => Ok(1.0),
            _ => Err(malformed()),
        },
    }
}

/// Inverse of [`parse_label_string`] for levels on the `1/A` grid.
pub fn format_label(level: f64, quorum: usize) -> String {
    let k = (level * quorum as f64).round() as usize;
    match k {
        0 => "0".to_owned(),
        k if k >= quorum => "1".to_owned(),
        k => format!("{k}/{quorum}"),
    }
}

/// Binary view of a level: sarcastic iff `level >= threshold`.
pub fn binarize(level: f64, threshold: f64) -> bool {
    level >= threshold
}

/// Summary counts over an aggregated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub per_category: BTreeMap<Category, usize>,
    /// `histogram[k]` counts examples whose level rounds to `k / quorum`.
    pub histogram: Vec<usize>,
    pub sarcastic: usize,
    pub threshold: f64,
    pub quorum: usize,
}

pub fn corpus_stats(corpus: &[LabeledExample], threshold: f64, quorum: usize) -> CorpusStats {
    let mut per_category: BTreeMap<Category, usize> =
        Category::ALL.iter().map(|&c| (c, 0)).collect();
    let mut histogram = vec![0; quorum + 1];
    let mut sarcastic = 0;
    for example in corpus {
        *per_category.entry(example.category).or_default() += 1;
        let bin = (example.label * quorum as f64).round().clamp(0.0, quorum as f64) as usize;
        histogram[bin] += 1;
        if binarize(example.label, threshold) {
            sarcastic += 1;
        }
    }
    CorpusStats {
        total: corpus.len(),
        per_category,
        histogram,
        sarcastic,
        threshold,
        quorum,
    }
}

impl fmt::Display for CorpusStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "N\t{}", self.total)?;
        for (category, count) in &self.per_category {
            writeln!(f, "category\t{category}\t{count}")?;
        }
        for (k, count) in self.histogram.iter().enumerate() {
            writeln!(f, "level\t{}\t{count}", format_label(k as f64 / self.quorum as f64, self.quorum))?;
        }
        write!(
            f,
            "sarcastic\t{}\t(threshold {:.6})",
            self.sarcastic, self.threshold
        )
    }
}

/// Parse one line of an aggregated corpus file.
pub fn parse_labeled_example(line: &str, line_no: usize) -> Result<LabeledExample> {
    let map = parse_object(line, line_no)?;
    let id = id_field(&map, line_no)?;
    let text = str_field(&map, "text", line_no)?.to_owned();
    let category = Category::parse(str_field(&map, "category", line_no)?);
    let label = match map.get("label") {
        None => {
            return Err(CorpusError::MissingField {
                line: line_no,
                field: "label",
            })
        }
        Some(v) => v.as_f64().ok_or(CorpusError::WrongType {
            line: line_no,
            field: "label",
        })?,
    };
    if !(0.0..=1.0).contains(&label) {
        return Err(CorpusError::LabelOutOfRange {
            line: line_no,
            label,
        });
    }
    let partial = map.get("partial").and_then(Value::as_bool).unwrap_or(false);
    Ok(LabeledExample {
        id,
        text,
        category,
        label,
        partial,
    })
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<LabeledExample>> {
    let mut seen = HashSet::new();
    let mut corpus = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let example = parse_labeled_example(&line, idx + 1)?;
        if !seen.insert(example.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: idx + 1,
                id: example.id,
            });
        }
        corpus.push(example);
    }
    Ok(corpus)
}

/// Serialize one example as a JSON Lines record (no trailing newline).
///
/// Labels use the shortest round-tripping decimal, which carries 17
/// significant digits for any non-terminating `k / A`.
pub fn labeled_example_line(example: &LabeledExample) -> String {
    serde_json::to_string(example).expect("LabeledExample serializes")
}

pub fn write_corpus<W: Write>(mut writer: W, corpus: &[LabeledExample]) -> std::io::Result<()> {
    for example in corpus {
        writeln!(writer, "{}", labeled_example_line(example))?;
    }
    writer.flush()
}
