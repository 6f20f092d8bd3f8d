//! Feed-forward sarcasm-level regressor.
//!
//! Sigmoid hidden layers with inverted dropout, a single sigmoid output unit,
//! mean squared error, and Adam. Everything is `f64` and gradients are derived
//! by hand; training is bit-deterministic for a given data order, config and
//! seed.

mod adam;
mod gradcheck;
mod network;
mod persist;
mod train;

use serde::{Deserialize, Serialize};

use crate::features::{FeatureConfig, FeatureVector};

pub use adam::AdamState;
pub use gradcheck::{grad_check, numerical_gradients};
pub use network::{dropout_mask, sigmoid, ForwardCache, Gradients, Layer, RegressorParams};
pub use persist::{ModelFile, FORMAT_VERSION};
pub use train::{train, train_subset, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("input has dimension {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("bad parameter shapes: {0}")]
    Shape(String),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("prediction/target length mismatch ({preds} vs {targets})")]
    LengthMismatch { preds: usize, targets: usize },
    #[error("non-finite training loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("finite-difference step must be non-zero and finite, got {0}")]
    InvalidStep(f64),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// Network shape and optimisation hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            epochs: 10,
            learning_rate: 1e-3,
            dropout: 0.2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            hidden_width: 128,
            hidden_layers: 2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(ModelError::Config(msg));
        if self.batch_size == 0 {
            return fail("batch size must be at least 1".into());
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("Adam betas must be in [0, 1)".into());
        }
        if !(self.epsilon > 0.0) {
            return fail("Adam epsilon must be positive".into());
        }
        if self.hidden_width == 0 || self.hidden_layers == 0 {
            return fail("hidden width and layer count must be at least 1".into());
        }
        Ok(())
    }
}

/// One training or evaluation example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: FeatureVector,
    pub target: f64,
}

impl Sample {
    pub fn new(features: FeatureVector, target: f64) -> Self {
        Self { features, target }
    }
}

/// A trained regressor together with what is needed to reproduce its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub params: RegressorParams,
    pub config: TrainConfig,
    pub features: Option<FeatureConfig>,
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        predict(&self.params, x)
    }

    pub fn dropout(&self) -> f64 {
        self.config.dropout
    }
}

/// Inference-mode forward pass; the result lies in `(0, 1)`.
pub fn predict(params: &RegressorParams, x: &[f64]) -> Result<f64> {
    params.forward_infer(x)
}

/// `(1/N) Σ (ŷ - y)²`.
pub fn mse_loss(preds: &[f64], targets: &[f64]) -> Result<f64> {
    if preds.len() != targets.len() {
        return Err(ModelError::LengthMismatch {
            preds: preds.len(),
            targets: targets.len(),
        });
    }
    if preds.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let sum: f64 = preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok(sum / preds.len() as f64)
}
