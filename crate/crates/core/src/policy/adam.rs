use serde::{Deserialize, Serialize};

use super::{Gradients, PolicyParams, ValueParams};
use crate::error::{Error, Result};

/// Adam moment estimates for one flat parameter vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize) -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; len], v: vec![0.0; len] }
    }

    /// One bias-corrected step with a per-entry learning rate.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lrs: &[f64]) -> Result<()> {
        let len = self.m.len();
        for l in [params.len(), grads.len(), lrs.len()] {
            if l != len {
                return Err(Error::DimensionMismatch { expected: len, got: l });
            }
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient".into()));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..len {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lrs[i] * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningRates {
    pub quantum: f64,
    pub classical: f64,
}

impl Default for LearningRates {
    fn default() -> Self {
        Self { quantum: 0.01, classical: 0.001 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub policy: Adam,
    pub value: Adam,
}

impl OptimizerState {
    pub fn new(policy: &PolicyParams, value: &ValueParams) -> Self {
        Self { policy: Adam::new(policy.len()), value: Adam::new(value.len()) }
    }
}

/// Applies one optimizer step to both networks. The value network is
/// classical throughout.
pub fn apply_update(
    policy: &mut PolicyParams,
    value: &mut ValueParams,
    grads: &Gradients,
    state: &mut OptimizerState,
    lr: LearningRates,
) -> Result<()> {
    let mut flat = policy.to_flat();
    let lrs = policy.learning_rates(lr.quantum, lr.classical);
    state.policy.step(&mut flat, &grads.policy, &lrs)?;
    let mut vflat = value.to_flat();
    let vlrs = vec![lr.classical; vflat.len()];
    state.value.step(&mut vflat, &grads.value, &vlrs)?;
    policy.set_flat(&flat)?;
    value.set_flat(&vflat)?;
    Ok(())
}
