//! Sarcasm quantification toolkit.
//!
//! Multi-annotator binary judgments are aggregated into a continuous sarcasm
//! level `k / A`, sentences are turned into fixed-length feature vectors, and a
//! small feed-forward network with a single sigmoid output unit is trained to
//! regress that level. Evaluation is k-fold cross-validation on MSE.
//!
//! - [`corpus`]: vote records, label aggregation, corpus statistics.
//! - [`features`]: hashed character n-grams or imported sentence embeddings.
//! - [`model`]: the regressor, manual backpropagation, Adam, training.
//! - [`eval`]: fold planning, cross-validation, metrics, reports.

pub mod corpus;
pub mod eval;
pub mod features;
pub mod model;
pub mod seed;

pub use corpus::{Category, CorpusStats, LabeledExample, VoteRecord, DEFAULT_QUORUM};
pub use eval::{CvReport, FoldPlan, Metrics};
pub use features::{Backend, EmbeddingTable, FeatureConfig, FeatureVector, NormalizeOptions};
pub use model::{Model, RegressorParams, Sample, TrainConfig};
