use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelError, Result};

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Fully connected layer. `weights` is row-major `fan_in x fan_out`, so the
/// weight from input `i` to unit `j` sits at `i * fan_out + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_in * fan_out],
            biases: vec![0.0; fan_out],
        }
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.fan_out + j]
    }

    fn affine(&self, input: &[f64]) -> Vec<f64> {
        let mut z = self.biases.clone();
        for (i, &xi) in input.iter().enumerate() {
            // hashed features are sparse
            if xi == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.fan_out..(i + 1) * self.fan_out];
            for (zj, &w) in z.iter_mut().zip(row) {
                *zj += xi * w;
            }
        }
        z
    }

    /// `dW += input ⊗ delta`, `db += delta`.
    fn accumulate(&mut self, input: &[f64], delta: &[f64]) {
        for (bj, &dj) in self.biases.iter_mut().zip(delta) {
            *bj += dj;
        }
        for (i, &xi) in input.iter().enumerate() {
            if xi == 0.0 {
                continue;
            }
            let row = &mut self.weights[i * self.fan_out..(i + 1) * self.fan_out];
            for (g, &dj) in row.iter_mut().zip(delta) {
                *g += xi * dj;
            }
        }
    }

    /// `W · delta`: gradient with respect to this layer's input.
    fn back_project(&self, delta: &[f64]) -> Vec<f64> {
        (0..self.fan_in)
            .map(|i| {
                let row = &self.weights[i * self.fan_out..(i + 1) * self.fan_out];
                row.iter().zip(delta).map(|(w, d)| w * d).sum()
            })
            .collect()
    }
}

/// Weights and biases of the regressor: `hidden_layers` sigmoid layers of
/// width `hidden_width`, then one sigmoid output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressorParams {
    pub layers: Vec<Layer>,
}

/// Same shapes as [`RegressorParams`].
pub type Gradients = RegressorParams;

impl RegressorParams {
    pub fn zeros(input_dim: usize, hidden_width: usize, hidden_layers: usize) -> Self {
        let mut layers = Vec::with_capacity(hidden_layers + 1);
        let mut fan_in = input_dim;
        for _ in 0..hidden_layers {
            layers.push(Layer::zeros(fan_in, hidden_width));
            fan_in = hidden_width;
        }
        layers.push(Layer::zeros(fan_in, 1));
        Self { layers }
    }

    /// Glorot-uniform weights from a seeded generator, zero biases.
    pub fn init(input_dim: usize, hidden_width: usize, hidden_layers: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden_width == 0 || hidden_layers == 0 {
            return Err(ModelError::Config(format!(
                "network dims must be positive (D={input_dim}, H={hidden_width}, L={hidden_layers})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Self::zeros(input_dim, hidden_width, hidden_layers);
        for layer in &mut params.layers {
            let limit = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self.layers.iter().map(|l| Layer::zeros(l.fan_in, l.fan_out)).collect(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn hidden_width(&self) -> usize {
        self.layers[0].fan_out
    }

    pub fn hidden_layers(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn num_values(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Every scalar in a fixed order: per layer, weights then biases.
    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn fill(&mut self, value: f64) {
        self.values_mut().for_each(|v| *v = value);
    }

    /// Shape and finiteness check.
    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.layers.first() else {
            return Err(ModelError::Shape("no layers".into()));
        };
        if self.layers.len() < 2 || first.fan_in == 0 || first.fan_out == 0 {
            return Err(ModelError::Shape("need at least one non-empty hidden layer".into()));
        }
        let width = first.fan_out;
        let mut fan_in = first.fan_in;
        for (idx, layer) in self.layers.iter().enumerate() {
            let expected_out = if idx + 1 == self.layers.len() { 1 } else { width };
            if layer.fan_in != fan_in
                || layer.fan_out != expected_out
                || layer.weights.len() != layer.fan_in * layer.fan_out
                || layer.biases.len() != layer.fan_out
            {
                return Err(ModelError::Shape(format!(
                    "layer {idx}: expected {fan_in}x{expected_out}, got {}x{} with {} weights and {} biases",
                    layer.fan_in,
                    layer.fan_out,
                    layer.weights.len(),
                    layer.biases.len()
                )));
            }
            fan_in = layer.fan_out;
        }
        if self.values().any(|v| !v.is_finite()) {
            return Err(ModelError::Shape("non-finite parameter".into()));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(ModelError::DimensionMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Inference pass: no dropout, no cache.
    pub fn forward_infer(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut h = x.to_vec();
        for layer in &self.layers {
            h = layer.affine(&h);
            h.iter_mut().for_each(|v| *v = sigmoid(*v));
        }
        Ok(h[0])
    }

    /// Training pass: inverted dropout after every hidden activation.
    pub fn forward_train<R: Rng + ?Sized>(
        &self,
        x: &[f64],
        dropout: f64,
        rng: &mut R,
    ) -> Result<(f64, ForwardCache)> {
        self.check_input(x)?;
        let hidden = self.hidden_layers();
        let mut activations = Vec::with_capacity(hidden);
        let mut masks = Vec::with_capacity(hidden);
        let mut outputs: Vec<Vec<f64>> = Vec::with_capacity(hidden);
        for layer in &self.layers[..hidden] {
            let input = outputs.last().map_or(x, Vec::as_slice);
            let mut a = layer.affine(input);
            a.iter_mut().for_each(|v| *v = sigmoid(*v));
            let mask = dropout_mask(a.len(), dropout, rng);
            let out = a.iter().zip(&mask).map(|(a, m)| a * m).collect();
            activations.push(a);
            masks.push(mask);
            outputs.push(out);
        }
        let last = outputs.last().map_or(x, Vec::as_slice);
        let prediction = sigmoid(self.layers[hidden].affine(last)[0]);
        Ok((
            prediction,
            ForwardCache {
                input: x.to_vec(),
                activations,
                masks,
                outputs,
                prediction,
            },
        ))
    }

    /// Gradients of the single-example squared error `(ŷ - y)²`.
    pub fn backward(&self, cache: &ForwardCache, target: f64) -> Gradients {
        let mut grads = self.zeros_like();
        self.accumulate_gradients(cache, target, 1, &mut grads);
        grads
    }

    /// Add this example's share of the batch-mean squared error gradient,
    /// `dL/dŷ = 2 (ŷ - y) / batch_len`, into `grads`.
    pub fn accumulate_gradients(
        &self,
        cache: &ForwardCache,
        target: f64,
        batch_len: usize,
        grads: &mut Gradients,
    ) {
        let y_hat = cache.prediction;
        let d_pred = 2.0 * (y_hat - target) / batch_len as f64;
        let mut delta = vec![d_pred * y_hat * (1.0 - y_hat)];
        let hidden = self.hidden_layers();
        for idx in (0..=hidden).rev() {
            let input = if idx == 0 {
                cache.input.as_slice()
            } else {
                cache.outputs[idx - 1].as_slice()
            };
            grads.layers[idx].accumulate(input, &delta);
            if idx == 0 {
                break;
            }
            let d_out = self.layers[idx].back_project(&delta);
            let a = &cache.activations[idx - 1];
            let mask = &cache.masks[idx - 1];
            delta = d_out
                .iter()
                .zip(mask)
                .zip(a)
                .map(|((d, m), a)| d * m * a * (1.0 - a))
                .collect();
        }
    }
}

/// Intermediate values of a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    /// Sigmoid outputs of each hidden layer, before dropout.
    pub activations: Vec<Vec<f64>>,
    /// Entries are 0 or `1 / (1 - p)`.
    pub masks: Vec<Vec<f64>>,
    /// Masked activations, i.e. what the next layer sees.
    pub outputs: Vec<Vec<f64>>,
    pub prediction: f64,
}

/// Inverted-dropout mask: each unit is dropped with probability `p` and
/// survivors are scaled by `1 / (1 - p)`. With `p = 0` no randomness is drawn.
pub fn dropout_mask<R: Rng + ?Sized>(len: usize, p: f64, rng: &mut R) -> Vec<f64> {
    if p <= 0.0 {
        return vec![1.0; len];
    }
    let scale = 1.0 / (1.0 - p);
    (0..len)
        .map(|_| if rng.random::<f64>() < p { 0.0 } else { scale })
        .collect()
}
