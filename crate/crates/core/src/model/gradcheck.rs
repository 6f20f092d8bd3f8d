use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::network::{Gradients, RegressorParams};
use super::{ModelError, Result};

/// Below this magnitude both gradients count as zero and are compared
/// absolutely.
const ABS_TOLERANCE: f64 = 1e-8;

fn slot(params: &mut RegressorParams, layer: usize, is_bias: bool, k: usize) -> &mut f64 {
    let layer = &mut params.layers[layer];
    if is_bias {
        &mut layer.biases[k]
    } else {
        &mut layer.weights[k]
    }
}

fn squared_error(params: &RegressorParams, x: &[f64], y: f64) -> Result<f64> {
    let y_hat = params.forward_infer(x)?;
    Ok((y_hat - y) * (y_hat - y))
}

/// Central differences `(L(θ+h) - L(θ-h)) / 2h` of the single-example squared
/// error for every parameter.
pub fn numerical_gradients(params: &RegressorParams, x: &[f64], y: f64, h: f64) -> Result<Gradients> {
    if h == 0.0 || !h.is_finite() {
        return Err(ModelError::InvalidStep(h));
    }
    let mut probe = params.clone();
    let mut grads = params.zeros_like();
    for layer_idx in 0..params.layers.len() {
        for is_bias in [false, true] {
            let len = if is_bias {
                params.layers[layer_idx].biases.len()
            } else {
                params.layers[layer_idx].weights.len()
            };
            for k in 0..len {
                let original = *slot(&mut probe, layer_idx, is_bias, k);
                *slot(&mut probe, layer_idx, is_bias, k) = original + h;
                let plus = squared_error(&probe, x, y)?;
                *slot(&mut probe, layer_idx, is_bias, k) = original - h;
                let minus = squared_error(&probe, x, y)?;
                *slot(&mut probe, layer_idx, is_bias, k) = original;
                *slot(&mut grads, layer_idx, is_bias, k) = (plus - minus) / (2.0 * h);
            }
        }
    }
    Ok(grads)
}

/// Largest relative error between backpropagated and finite-difference
/// gradients. Dropout is off for the check.
pub fn grad_check(params: &RegressorParams, x: &[f64], y: f64, h: f64) -> Result<f64> {
    let numeric = numerical_gradients(params, x, y, h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, cache) = params.forward_train(x, 0.0, &mut rng)?;
    let analytic = params.backward(&cache, y);
    Ok(analytic
        .values()
        .zip(numeric.values())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max))
}

pub(crate) fn relative_error(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    let diff = (a - n).abs();
    if scale < ABS_TOLERANCE {
        if diff <= ABS_TOLERANCE {
            0.0
        } else {
            diff / ABS_TOLERANCE
        }
    } else {
        diff / scale
    }
}
