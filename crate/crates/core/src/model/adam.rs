use super::network::{Gradients, RegressorParams};
use super::TrainConfig;

/// First and second moment estimates for every parameter, flattened in
/// [`RegressorParams::values`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn for_params(params: &RegressorParams) -> Self {
        Self::new(params.num_values())
    }

    /// One Adam update over parallel parameter and gradient sequences.
    pub fn step_values<'a, P, G>(&mut self, params: P, grads: G, config: &TrainConfig)
    where
        P: IntoIterator<Item = &'a mut f64>,
        G: IntoIterator<Item = &'a f64>,
    {
        self.t += 1;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let (b1, b2) = (config.beta1, config.beta2);
        let correction1 = 1.0 - b1.powi(t);
        let correction2 = 1.0 - b2.powi(t);
        for (((theta, &g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(self.m.iter_mut())
            .zip(self.v.iter_mut())
        {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / correction1;
            let v_hat = *v / correction2;
            *theta -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
        }
    }

    pub fn step(&mut self, params: &mut RegressorParams, grads: &Gradients, config: &TrainConfig) {
        debug_assert_eq!(params.num_values(), self.m.len());
        self.step_values(params.values_mut(), grads.values(), config);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_learning_rate() {
        let config = TrainConfig::default();
        let mut state = AdamState::new(1);
        let mut theta = [0.0];
        state.step_values(&mut theta, &[1.0], &config);
        // m_hat = v_hat = 1
        assert_eq!(theta[0], -0.001 / (1.0 + 1e-8));
        assert!((theta[0] + 0.000_999_999_990).abs() < 1e-15);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let config = TrainConfig::default();
        let mut params = RegressorParams::init(3, 2, 2, 1).unwrap();
        let before = params.clone();
        let mut state = AdamState::for_params(&params);
        let grads = params.zeros_like();
        state.step(&mut params, &grads, &config);
        assert_eq!(params, before);
    }

    #[test]
    fn two_constant_steps() {
        let config = TrainConfig::default();
        let mut state = AdamState::new(1);
        let mut theta = [0.0];
        state.step_values(&mut theta, &[1.0], &config);
        state.step_values(&mut theta, &[1.0], &config);
        assert!((theta[0] + 0.002).abs() < 1e-6);
    }
}
