use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sarquant::corpus::DEFAULT_QUORUM;
use sarquant::{Backend, FeatureConfig, NormalizeOptions, TrainConfig};

/// Sarcasm-level corpora, regression training and cross-validation.
#[derive(Debug, Parser)]
#[command(name = "sarquant", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a votes file into an aggregated corpus (label = yes-votes / quorum).
    Aggregate {
        /// Votes file (JSON Lines).
        #[arg(long = "in")]
        input: PathBuf,
        /// Aggregated corpus file to write (JSON Lines).
        #[arg(long)]
        out: PathBuf,
        /// Annotators per sentence.
        #[arg(long, default_value_t = DEFAULT_QUORUM)]
        quorum: usize,
    },
    /// Print size, per-category counts and the level histogram of a corpus.
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        /// Level at or above which a sentence counts as sarcastic ("k/A" or decimal).
        #[arg(long, default_value = "6/11", value_parser = parse_threshold)]
        threshold: f64,
        #[arg(long, default_value_t = DEFAULT_QUORUM)]
        quorum: usize,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Train the regressor on a corpus and write a model file.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        /// Model file to write.
        #[arg(long)]
        model: PathBuf,
        /// Optional JSON file for the per-epoch training loss.
        #[arg(long)]
        history: Option<PathBuf>,
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// K-fold cross-validation: table on stdout, JSON report to --out.
    Cv {
        #[arg(long = "in")]
        input: PathBuf,
        /// Number of folds.
        #[arg(long, default_value_t = 10)]
        k: usize,
        /// JSON report file to write.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Threshold for the binary accuracy metric ("k/A" or decimal).
        #[arg(long, default_value = "6/11", value_parser = parse_threshold)]
        threshold: f64,
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Predict sarcasm levels with a trained model, one per input line.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Sentence to score; may be repeated.
        #[arg(long)]
        text: Vec<String>,
        /// Plain-text file, one sentence per line.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        /// Corpus file (JSON Lines); needed for the embeddings backend.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Embeddings file for the embeddings backend.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Compare backpropagated gradients with central finite differences on a random net.
    Gradcheck {
        #[arg(long, default_value_t = 6)]
        dim: usize,
        #[arg(long, default_value_t = 4)]
        hidden: usize,
        #[arg(long, default_value_t = 2)]
        layers: usize,
        /// Finite-difference step.
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        /// Fail (exit 2) if the max relative error reaches this.
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the annotation service.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory holding the event log.
        #[arg(long, env = "SARQUANT_DATA_DIR", default_value = "annotate-data")]
        data_dir: PathBuf,
        #[arg(long, default_value_t = DEFAULT_QUORUM)]
        quorum: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Hashed,
    Embeddings,
}

#[derive(Debug, Clone, Args)]
pub struct FeatureArgs {
    /// Feature backend.
    #[arg(long, value_enum, default_value_t = BackendArg::Hashed)]
    pub backend: BackendArg,
    /// Hashed feature dimension (embeddings take it from the table).
    #[arg(long, default_value_t = 4096)]
    pub dim: usize,
    #[arg(long, default_value_t = 3)]
    pub ngram_min: usize,
    #[arg(long, default_value_t = 5)]
    pub ngram_max: usize,
    /// Embeddings file (required with --backend embeddings).
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub strip_diacritics: bool,
    #[arg(long)]
    pub strip_tatweel: bool,
    #[arg(long)]
    pub collapse_whitespace: bool,
}

impl FeatureArgs {
    pub fn config(&self, table_dim: Option<usize>) -> FeatureConfig {
        FeatureConfig {
            backend: match self.backend {
                BackendArg::Hashed => Backend::Hashed,
                BackendArg::Embeddings => Backend::Embeddings,
            },
            dimension: table_dim.unwrap_or(self.dim),
            ngram_min: self.ngram_min,
            ngram_max: self.ngram_max,
            normalize: NormalizeOptions {
                strip_diacritics: self.strip_diacritics,
                strip_tatweel: self.strip_tatweel,
                collapse_whitespace: self.collapse_whitespace,
            },
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub learning_rate: f64,
    /// Dropout rate after each hidden layer.
    #[arg(long, default_value_t = 0.2)]
    pub dropout: f64,
    /// Units per hidden layer.
    #[arg(long, default_value_t = 128)]
    pub hidden: usize,
    /// Number of hidden layers.
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    /// Root seed; every random stream is derived from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl TrainArgs {
    pub fn config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            dropout: self.dropout,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            hidden_width: self.hidden,
            hidden_layers: self.layers,
            seed: self.seed,
        }
    }
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let value = match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|e| format!("{e}"))?;
            let den: f64 = den.trim().parse().map_err(|e| format!("{e}"))?;
            num / den
        }
        None => s.trim().parse().map_err(|e| format!("{e}"))?,
    };
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(format!("threshold must lie strictly between 0 and 1, got {value}"))
    }
}
