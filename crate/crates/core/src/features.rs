//! Sentence feature vectors.
//!
//! Two backends produce a fixed-length vector per sentence: feature hashing of
//! character n-grams, or lookup in an embedding table exported by an external
//! frozen encoder.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledExample;
use crate::seed::fnv1a64;

const TATWEEL: char = '\u{0640}';

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("invalid feature config: {0}")]
    Config(String),
    #[error("embeddings file: missing `dim<TAB>D` header")]
    MissingHeader,
    #[error("embeddings file line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("embedding for id {id:?} has {got} values, expected {dim}")]
    RowLength { id: String, got: usize, dim: usize },
    #[error("duplicate embedding id {0:?}")]
    DuplicateId(String),
    #[error("non-finite value in embedding for id {0:?}")]
    NonFinite(String),
    #[error("no embedding for id {0}")]
    MissingId(String),
    #[error("embeddings backend needs an embedding table")]
    NoTable,
    #[error("embedding table has dimension {table}, config expects {config}")]
    DimensionMismatch { table: usize, config: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FeatureError> = std::result::Result<T, E>;

/// Optional text clean-up. Everything is off by default, so text reaches the
/// featurizer exactly as annotated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizeOptions {
    #[serde(default)]
    pub strip_diacritics: bool,
    #[serde(default)]
    pub strip_tatweel: bool,
    #[serde(default)]
    pub collapse_whitespace: bool,
}

impl NormalizeOptions {
    pub fn is_identity(&self) -> bool {
        *self == NormalizeOptions::default()
    }
}

/// Arabic harakat, tanween, shadda, sukun and the superscript alef.
fn is_arabic_diacritic(c: char) -> bool {
    matches!(c, '\u{064B}'..='\u{065F}' | '\u{0670}')
}

pub fn normalize_text(text: &str, options: &NormalizeOptions) -> String {
    if options.is_identity() {
        return text.to_owned();
    }
    let mut out = String::with_capacity(text.len());
    let mut in_space = false;
    for c in text.chars() {
        if options.strip_tatweel && c == TATWEEL {
            continue;
        }
        if options.strip_diacritics && is_arabic_diacritic(c) {
            continue;
        }
        if options.collapse_whitespace && c.is_whitespace() {
            if !in_space {
                out.push(' ');
            }
            in_space = true;
            continue;
        }
        in_space = false;
        out.push(c);
    }
    out
}

/// All contiguous code-point n-grams for each `n` in `n_min..=n_max`, in
/// order of increasing `n` then position.
pub fn char_ngrams(text: &str, n_min: usize, n_max: usize) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut grams = Vec::new();
    for n in n_min.max(1)..=n_max {
        if chars.len() < n {
            continue;
        }
        grams.extend(chars.windows(n).map(|w| w.iter().collect::<String>()));
    }
    grams
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Hashed,
    Embeddings,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub backend: Backend,
    pub dimension: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    #[serde(default)]
    pub normalize: NormalizeOptions,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            backend: Backend::Hashed,
            dimension: 4096,
            ngram_min: 3,
            ngram_max: 5,
            normalize: NormalizeOptions::default(),
        }
    }
}

impl FeatureConfig {
    pub fn hashed(dimension: usize, ngram_min: usize, ngram_max: usize) -> Self {
        Self {
            backend: Backend::Hashed,
            dimension,
            ngram_min,
            ngram_max,
            normalize: NormalizeOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(FeatureError::Config("dimension must be at least 1".into()));
        }
        if self.ngram_min == 0 || self.ngram_min > self.ngram_max {
            return Err(FeatureError::Config(format!(
                "n-gram range [{}, {}] is empty or starts at 0",
                self.ngram_min, self.ngram_max
            )));
        }
        Ok(())
    }
}

/// Dense sentence representation. Always finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    /// Returns `None` if any value is non-finite.
    pub fn new(values: Vec<f64>) -> Option<Self> {
        values.iter().all(|v| v.is_finite()).then_some(Self(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Bucket for a gram: FNV-1a 64 of its UTF-8 bytes, modulo `dim`.
pub fn gram_index(gram: &str, dim: usize) -> usize {
    (fnv1a64(gram.as_bytes()) % dim as u64) as usize
}

/// Hashed character n-gram counts scaled to unit Euclidean norm.
pub fn hash_featurize(text: &str, config: &FeatureConfig) -> FeatureVector {
    let text = normalize_text(text, &config.normalize);
    let mut values = vec![0.0; config.dimension];
    for gram in char_ngrams(&text, config.ngram_min, config.ngram_max) {
        values[gram_index(&gram, config.dimension)] += 1.0;
    }
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        values.iter_mut().for_each(|v| *v /= norm);
    }
    FeatureVector(values)
}

/// Sentence vectors keyed by example id, as exported by an external encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    rows: HashMap<String, FeatureVector>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&FeatureVector> {
        self.rows.get(id)
    }

    pub fn insert(&mut self, id: String, values: Vec<f64>) -> Result<()> {
        if values.len() != self.dim {
            return Err(FeatureError::RowLength {
                id,
                got: values.len(),
                dim: self.dim,
            });
        }
        let vector = match FeatureVector::new(values) {
            Some(v) => v,
            None => return Err(FeatureError::NonFinite(id)),
        };
        if self.rows.contains_key(&id) {
            return Err(FeatureError::DuplicateId(id));
        }
        self.rows.insert(id, vector);
        Ok(())
    }
}

/// Load an embeddings file: a `dim<TAB>D` header, then `id<TAB>v1,...,vD`
/// rows. Lines starting with `#` carry exporter metadata and are skipped, as
/// are blank lines.
pub fn load_embedding_table<R: BufRead>(reader: R) -> Result<EmbeddingTable> {
    let mut table: Option<EmbeddingTable> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(table) = table.as_mut() else {
            let dim = line
                .strip_prefix("dim\t")
                .ok_or(FeatureError::MissingHeader)?
                .trim()
                .parse::<usize>()
                .map_err(|e| FeatureError::Malformed {
                    line: line_no,
                    reason: format!("bad dimension: {e}"),
                })?;
            if dim == 0 {
                return Err(FeatureError::Malformed {
                    line: line_no,
                    reason: "dimension must be at least 1".into(),
                });
            }
            table = Some(EmbeddingTable::new(dim));
            continue;
        };
        let (id, rest) = line.split_once('\t').ok_or_else(|| FeatureError::Malformed {
            line: line_no,
            reason: "expected `id<TAB>values`".into(),
        })?;
        if id.is_empty() {
            return Err(FeatureError::Malformed {
                line: line_no,
                reason: "empty id".into(),
            });
        }
        let values = rest
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| FeatureError::Malformed {
                line: line_no,
                reason: format!("id {id:?}: {e}"),
            })?;
        table.insert(id.to_owned(), values)?;
    }
    table.ok_or(FeatureError::MissingHeader)
}

/// Features for one example under either backend.
pub fn featurize(
    example: &LabeledExample,
    config: &FeatureConfig,
    table: Option<&EmbeddingTable>,
) -> Result<FeatureVector> {
    match config.backend {
        Backend::Hashed => Ok(hash_featurize(&example.text, config)),
        Backend::Embeddings => {
            let table = table.ok_or(FeatureError::NoTable)?;
            if table.dim() != config.dimension {
                return Err(FeatureError::DimensionMismatch {
                    table: table.dim(),
                    config: config.dimension,
                });
            }
            table
                .get(&example.id)
                .cloned()
                .ok_or_else(|| FeatureError::MissingId(example.id.clone()))
        }
    }
}

pub fn featurize_corpus(
    corpus: &[LabeledExample],
    config: &FeatureConfig,
    table: Option<&EmbeddingTable>,
) -> Result<Vec<FeatureVector>> {
    config.validate()?;
    corpus.iter().map(|e| featurize(e, config, table)).collect()
}
