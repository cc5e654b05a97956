use super::{Dims, Gradients, ModelParams, TENSOR_NAMES};
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    first_moment: ModelParams,
    second_moment: ModelParams,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(dims: Dims, learning_rate: f64) -> Self {
        AdamState {
            first_moment: ModelParams::zeros(dims),
            second_moment: ModelParams::zeros(dims),
            step: 0,
            learning_rate,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn second_moment(&self) -> &ModelParams {
        &self.second_moment
    }

    /// Applies one update in place.
    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients) -> Result<()> {
        if params.dims != grads.dims || params.dims != self.first_moment.dims {
            return Err(Error::Dimension(format!(
                "adam step on {:?} with gradients {:?} and state {:?}",
                params.dims, grads.dims, self.first_moment.dims
            )));
        }
        for (slice, name) in grads.slices().into_iter().zip(TENSOR_NAMES) {
            if slice.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2, eps, lr) = (self.beta1, self.beta2, self.epsilon, self.learning_rate);
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        let tensors = params
            .slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(self.first_moment.slices_mut())
            .zip(self.second_moment.slices_mut())
            .zip(TENSOR_NAMES);
        for ((((p, g), m), v), name) in tensors {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(name));
            }
        }
        Ok(())
    }
}

/// Convenience wrapper returning updated copies.
pub fn adam_step(
    params: &ModelParams,
    grads: &Gradients,
    state: &AdamState,
) -> Result<(ModelParams, AdamState)> {
    let mut params = params.clone();
    let mut state = state.clone();
    state.step(&mut params, grads)?;
    Ok((params, state))
}
