use std::path::Path;

use serde::{Deserialize, Serialize};

use super::network::{Layer, RegressorParams};
use super::{Model, ModelError, Result, TrainConfig};
use crate::features::FeatureConfig;

pub const FORMAT_VERSION: u32 = 1;

/// On-disk model document. Weight arrays are row-major per layer, input
/// layer first, output unit last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    #[serde(rename = "D")]
    pub input_dim: usize,
    #[serde(rename = "H")]
    pub hidden_width: usize,
    #[serde(rename = "L")]
    pub hidden_layers: usize,
    pub p: f64,
    pub hidden_activation: String,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub config: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureConfig>,
}

impl From<&Model> for ModelFile {
    fn from(model: &Model) -> Self {
        let params = &model.params;
        Self {
            format_version: FORMAT_VERSION,
            input_dim: params.input_dim(),
            hidden_width: params.hidden_width(),
            hidden_layers: params.hidden_layers(),
            p: model.config.dropout,
            hidden_activation: "sigmoid".to_owned(),
            weights: params.layers.iter().map(|l| l.weights.clone()).collect(),
            biases: params.layers.iter().map(|l| l.biases.clone()).collect(),
            config: model.config.clone(),
            features: model.features.clone(),
        }
    }
}

impl TryFrom<ModelFile> for Model {
    type Error = ModelError;

    fn try_from(file: ModelFile) -> Result<Self> {
        if file.format_version != FORMAT_VERSION {
            return Err(ModelError::Format(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        if file.hidden_activation != "sigmoid" {
            return Err(ModelError::Format(format!(
                "unsupported hidden_activation {:?}",
                file.hidden_activation
            )));
        }
        let expected_layers = file.hidden_layers + 1;
        if file.weights.len() != expected_layers || file.biases.len() != expected_layers {
            return Err(ModelError::Format(format!(
                "expected {expected_layers} weight and bias arrays, got {} and {}",
                file.weights.len(),
                file.biases.len()
            )));
        }
        if file.config.hidden_width != file.hidden_width
            || file.config.hidden_layers != file.hidden_layers
            || file.config.dropout != file.p
        {
            return Err(ModelError::Format("config echo disagrees with D/H/L/p".into()));
        }
        let mut fan_in = file.input_dim;
        let layers = file
            .weights
            .into_iter()
            .zip(file.biases)
            .enumerate()
            .map(|(idx, (weights, biases))| {
                let fan_out = if idx + 1 == expected_layers { 1 } else { file.hidden_width };
                let layer = Layer {
                    fan_in,
                    fan_out,
                    weights,
                    biases,
                };
                fan_in = fan_out;
                layer
            })
            .collect();
        let params = RegressorParams { layers };
        params.validate()?;
        if let Some(features) = &file.features {
            if features.dimension != file.input_dim {
                return Err(ModelError::Format(format!(
                    "feature dimension {} does not match D = {}",
                    features.dimension, file.input_dim
                )));
            }
        }
        Ok(Model {
            params,
            config: file.config,
            features: file.features,
        })
    }
}

impl Model {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ModelFile::from(self)).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(s)?;
        Model::try_from(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
