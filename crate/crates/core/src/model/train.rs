use rand::seq::SliceRandom;

use super::adam::AdamState;
use super::network::RegressorParams;
use super::{Model, ModelError, Result, Sample, TrainConfig};
use crate::seed::{derive_seed, rng_for};

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    /// Mean training-mode MSE per epoch.
    pub history: Vec<f64>,
}

/// Train on the whole dataset.
pub fn train(data: &[Sample], config: &TrainConfig) -> Result<TrainOutcome> {
    let indices: Vec<usize> = (0..data.len()).collect();
    train_subset(data, &indices, config)
}

/// Train on `data[i]` for each `i` in `indices`, which also fixes the
/// starting order before the first shuffle.
pub fn train_subset(data: &[Sample], indices: &[usize], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let Some(&first) = indices.first() else {
        return Err(ModelError::EmptyDataset);
    };
    let dim = data[first].features.len();
    for &i in indices {
        let got = data[i].features.len();
        if got != dim {
            return Err(ModelError::DimensionMismatch { expected: dim, got });
        }
    }

    let mut params = RegressorParams::init(
        dim,
        config.hidden_width,
        config.hidden_layers,
        derive_seed(config.seed, "init"),
    )?;
    let mut adam = AdamState::for_params(&params);
    let mut grads = params.zeros_like();
    let mut rng = rng_for(config.seed, "train");
    let mut order = indices.to_vec();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_sq_error = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            grads.fill(0.0);
            let mut batch_sq_error = 0.0;
            for &i in batch {
                let sample = &data[i];
                let (y_hat, cache) =
                    params.forward_train(sample.features.as_slice(), config.dropout, &mut rng)?;
                batch_sq_error += (y_hat - sample.target) * (y_hat - sample.target);
                params.accumulate_gradients(&cache, sample.target, batch.len(), &mut grads);
            }
            if !batch_sq_error.is_finite() {
                return Err(ModelError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx + 1,
                });
            }
            adam.step(&mut params, &grads, config);
            epoch_sq_error += batch_sq_error;
        }
        let epoch_loss = epoch_sq_error / order.len() as f64;
        tracing::debug!(epoch, loss = epoch_loss, "epoch done");
        history.push(epoch_loss);
    }

    Ok(TrainOutcome {
        model: Model {
            params,
            config: config.clone(),
            features: None,
        },
        history,
    })
}
