//! Adam with bias-corrected moment estimates.

use crate::layers::Param;
use crate::{Error, Float, Result, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub eta: Float,
    pub beta1: Float,
    pub beta2: Float,
    pub epsilon_hat: Float,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig { eta: 0.001, beta1: 0.9, beta2: 0.999, epsilon_hat: 1e-8 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.eta > 0.0 && (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2) && self.epsilon_hat > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!("optimizer settings out of range: {self:?}")))
        }
    }
}

/// First and second moment estimates, one pair per parameter tensor, in the
/// order the parameters are handed to [`adam_step`].
#[derive(Clone, Debug, Default)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One Adam update using the gradients stored on `params`:
///
/// ```text
/// m ← β1 m + (1 − β1) g        m̂ = m / (1 − β1^t)
/// v ← β2 v + (1 − β2) g²       v̂ = v / (1 − β2^t)
/// θ ← θ − η m̂ / (√v̂ + ε̂)
/// ```
pub fn adam_step(params: &mut [&mut Param], state: &mut AdamState, cfg: &OptimizerConfig) -> Result<()> {
    if state.m.is_empty() {
        state.m = params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
        state.v = state.m.clone();
    }
    if state.m.len() != params.len() {
        return Err(Error::shape("adam_step", format!("{} moment tensors for {} parameters", state.m.len(), params.len())));
    }
    for (p, m) in params.iter().zip(&state.m) {
        if p.value.shape() != m.shape() || p.grad.shape() != m.shape() {
            return Err(Error::shape("adam_step", format!("parameter {:?} vs state {:?}", p.value.shape(), m.shape())));
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for ((p, m), v) in params.iter_mut().zip(&mut state.m).zip(&mut state.v) {
        let Param { value, grad } = &mut **p;
        for (((theta, &g), mi), vi) in value.data_mut().iter_mut().zip(grad.data()).zip(m.data_mut()).zip(v.data_mut()) {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * g;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * g * g;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *theta -= cfg.eta * m_hat / (v_hat.sqrt() + cfg.epsilon_hat);
        }
    }
    Ok(())
}
