use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moment estimates, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState<T> {
    first: Vec<Vec<T>>,
    second: Vec<Vec<T>>,
    step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new() -> Self {
        Self {
            first: Vec::new(),
            second: Vec::new(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected adaptive-moment update:
/// `θ ← θ − lr · m̂ / (√v̂ + ε)` with `m̂ = m/(1−β₁ᵗ)`, `v̂ = v/(1−β₂ᵗ)`.
pub fn adam_step<T: Scalar>(
    params: &mut [&mut [T]],
    grads: &[&[T]],
    state: &mut OptimizerState<T>,
    config: &AdamConfig,
) -> Result<()> {
    if params.len() != grads.len() {
        return Err(Error::Dimension {
            op: "adam_step",
            detail: format!("{} parameter tensors, {} gradient tensors", params.len(), grads.len()),
        });
    }
    for (t, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() {
            return Err(Error::Shape {
                op: "adam_step",
                left: (t, p.len()),
                right: (t, g.len()),
            });
        }
    }
    if state.step == 0 && state.first.is_empty() {
        state.first = grads.iter().map(|g| vec![T::zero(); g.len()]).collect();
        state.second = state.first.clone();
    }
    if state.first.len() != grads.len() || state.first.iter().zip(grads).any(|(m, g)| m.len() != g.len()) {
        return Err(Error::Dimension {
            op: "adam_step",
            detail: "optimizer state was built for differently shaped parameters".into(),
        });
    }

    state.step += 1;
    let beta1 = T::lit(config.beta1);
    let beta2 = T::lit(config.beta2);
    let one = T::one();
    let t = state.step as i32;
    let correction1 = one - beta1.powi(t);
    let correction2 = one - beta2.powi(t);
    let lr = T::lit(config.learning_rate);
    let eps = T::lit(config.epsilon);

    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.first.iter_mut().zip(state.second.iter_mut()))
    {
        for (((theta, &grad), mi), vi) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = beta1 * *mi + (one - beta1) * grad;
            *vi = beta2 * *vi + (one - beta2) * grad * grad;
            let m_hat = *mi / correction1;
            let v_hat = *vi / correction2;
            *theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
