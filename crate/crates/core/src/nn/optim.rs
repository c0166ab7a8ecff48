use super::ParameterStore;
use crate::error::{Error, Result};

/// Adam with decoupled weight decay. Decay touches only weight matrices and
/// embedding tables; buffers are never updated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Step count and first/second moment estimates, shaped like the store.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(store: &ParameterStore) -> Self {
        let zeros: Vec<Vec<f64>> = store
            .params()
            .iter()
            .map(|p| vec![0.0; p.value.data.len()])
            .collect();
        Self {
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }
}

impl AdamW {
    /// Apply one update from the gradients currently held in `store`.
    /// Any non-finite gradient aborts the step before anything changes.
    pub fn step(&self, store: &mut ParameterStore, state: &mut AdamState) -> Result<()> {
        if let Some(bad) = store
            .params()
            .iter()
            .find(|p| p.kind.trainable() && !p.grad.is_finite())
        {
            return Err(Error::NonFiniteGradient {
                param: bad.name.clone(),
            });
        }
        state.step += 1;
        let t = state.step as i32;
        let correct1 = 1.0 - self.beta1.powi(t);
        let correct2 = 1.0 - self.beta2.powi(t);
        for (i, p) in store.params_mut().iter_mut().enumerate() {
            if !p.kind.trainable() {
                continue;
            }
            let decay = if p.kind.decays() {
                1.0 - self.lr * self.weight_decay
            } else {
                1.0
            };
            let (m, v) = (&mut state.first[i], &mut state.second[i]);
            for (j, (theta, &g)) in p.value.data.iter_mut().zip(&p.grad.data).enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g;
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g * g;
                let m_hat = m[j] / correct1;
                let v_hat = v[j] / correct2;
                *theta = *theta * decay - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
            if !p.value.is_finite() {
                return Err(Error::NonFiniteGradient {
                    param: p.name.clone(),
                });
            }
        }
        Ok(())
    }
}
