//! Hybrid policy: affine+tanh encoder into RY data loading, a fixed
//! `N_QUBITS`-qubit circuit of rotation blocks and QAOA cost/mixer layers,
//! `⟨Z_q⟩` readout, and a masked-softmax linear head over the cities.

mod adam;
mod grad;
mod params;

use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::sim::{expectations, Circuit, CircuitMetrics, GateKind, Observable, ZZHamiltonian};

pub use adam::{apply_update, Adam, LearningRates, OptimizerState};
pub use grad::{reinforce_gradients, Gradients};
pub use params::{
    value_forward, Affine, InitScales, PolicyParams, PolicyShape, ValueParams, ANGLE_INIT_STD, N_LAYERS, N_QUBITS,
    VALUE_HIDDEN,
};

/// Builds the policy circuit.
///
/// Slots: `0..Q` data-loading angles, then `[layer][qubit][RY, RZ]`
/// rotations, then `[layer][γ, β]`. The cost layer is `RZZ(2γ w)` per term
/// of `h`, the mixer `RX(2β)` per qubit.
pub fn policy_circuit(n_qubits: usize, n_layers: usize, h: &ZZHamiltonian) -> Result<Circuit> {
    if h.n_qubits() > n_qubits {
        return Err(Error::DimensionMismatch { expected: n_qubits, got: h.n_qubits() });
    }
    let mut c = Circuit::new(n_qubits);
    for q in 0..n_qubits {
        c.push_param(GateKind::Ry, &[q], q, 1.0)?;
    }
    let rot_base = n_qubits;
    let qaoa_base = rot_base + 2 * n_layers * n_qubits;
    for l in 0..n_layers {
        for q in 0..n_qubits {
            let slot = rot_base + 2 * (l * n_qubits + q);
            c.push_param(GateKind::Ry, &[q], slot, 1.0)?;
            c.push_param(GateKind::Rz, &[q], slot + 1, 1.0)?;
        }
        let gamma = qaoa_base + 2 * l;
        for t in h.terms() {
            c.push_param(GateKind::Rzz, &[t.i, t.j], gamma, 2.0 * t.weight)?;
        }
        for q in 0..n_qubits {
            c.push_param(GateKind::Rx, &[q], gamma + 1, 2.0)?;
        }
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ActionDistribution {
    pub probabilities: Vec<f64>,
    /// Masked entries hold `-∞`.
    pub logits: Vec<f64>,
    pub mask: Vec<bool>,
}

impl ActionDistribution {
    /// Softmax restricted to unmasked entries; masked probabilities are
    /// exactly zero.
    pub fn masked_softmax(raw_logits: &[f64], mask: &[bool]) -> Result<Self> {
        if raw_logits.len() != mask.len() {
            return Err(Error::DimensionMismatch { expected: mask.len(), got: raw_logits.len() });
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::AllMasked);
        }
        let logits: Vec<f64> =
            raw_logits.iter().zip(mask).map(|(&l, &m)| if m { l } else { f64::NEG_INFINITY }).collect();
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::NonFinite("logits".into()));
        }
        let exps: Vec<f64> = logits.iter().zip(mask).map(|(&l, &m)| if m { (l - max).exp() } else { 0.0 }).collect();
        let z: f64 = exps.iter().sum();
        Ok(Self { probabilities: exps.iter().map(|e| e / z).collect(), logits, mask: mask.to_vec() })
    }

    /// Highest-probability unmasked index, lowest index on ties.
    pub fn greedy(&self) -> usize {
        let mut best = None;
        for (i, (&p, &m)) in self.probabilities.iter().zip(&self.mask).enumerate() {
            if m && best.is_none_or(|(_, bp)| p > bp) {
                best = Some((i, p));
            }
        }
        best.map(|(i, _)| i).expect("at least one unmasked action")
    }

    /// Inverse-CDF draw; never returns a masked index.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = None;
        for (i, (&p, &m)) in self.probabilities.iter().zip(&self.mask).enumerate() {
            if !m {
                continue;
            }
            acc += p;
            last = Some(i);
            if u < acc {
                return i;
            }
        }
        last.expect("at least one unmasked action")
    }
}

pub fn sample_action<R: Rng + ?Sized>(dist: &ActionDistribution, rng: &mut R) -> usize {
    dist.sample(rng)
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub(crate) struct ForwardTrace {
    /// `tanh(W s + b)`
    pub squashed: Vec<f64>,
    pub circuit_params: Vec<f64>,
    pub readout: Vec<f64>,
    pub dist: ActionDistribution,
}

/// The policy's fixed structure: its circuit and readout observables.
#[derive(Clone, Debug)]
pub struct HybridPolicy {
    shape: PolicyShape,
    circuit: Circuit,
    observables: Vec<Observable>,
}

impl HybridPolicy {
    pub fn new(shape: PolicyShape, h_policy: &ZZHamiltonian) -> Result<Self> {
        let circuit = policy_circuit(shape.n_qubits, shape.n_layers, h_policy)?;
        let observables = (0..shape.n_qubits).map(Observable::Z).collect();
        Ok(Self { shape, circuit, observables })
    }

    pub fn shape(&self) -> PolicyShape {
        self.shape
    }

    pub fn circuit(&self) -> &Circuit {
        &self.circuit
    }

    pub(crate) fn observables(&self) -> &[Observable] {
        &self.observables
    }

    pub fn metrics(&self) -> CircuitMetrics {
        self.circuit.metrics()
    }

    fn check(&self, state: &[f64], params: &PolicyParams) -> Result<()> {
        if params.shape != self.shape {
            return Err(Error::InvalidParameter(format!(
                "parameters built for {:?}, policy is {:?}",
                params.shape, self.shape
            )));
        }
        if state.len() != self.shape.state_dim() {
            return Err(Error::DimensionMismatch { expected: self.shape.state_dim(), got: state.len() });
        }
        Ok(())
    }

    /// Data-loading angles `π·tanh(W s + b)`.
    pub fn encode_observation(&self, state: &[f64], params: &PolicyParams) -> Result<Vec<f64>> {
        self.check(state, params)?;
        Ok(squash(state, params).into_iter().map(|u| PI * u).collect())
    }

    pub fn forward(&self, state: &[f64], params: &PolicyParams, mask: &[bool]) -> Result<ActionDistribution> {
        Ok(self.trace(state, params, mask)?.dist)
    }

    pub(crate) fn trace(&self, state: &[f64], params: &PolicyParams, mask: &[bool]) -> Result<ForwardTrace> {
        self.check(state, params)?;
        let squashed = squash(state, params);
        let circuit_params: Vec<f64> = squashed.iter().map(|u| PI * u).chain(params.circuit_angles()).collect();
        let readout = expectations(&self.circuit, &circuit_params, &self.observables)?;
        let logits = params.head_weights.apply(&readout);
        let dist = ActionDistribution::masked_softmax(&logits, mask)?;
        Ok(ForwardTrace { squashed, circuit_params, readout, dist })
    }
}

fn squash(state: &[f64], params: &PolicyParams) -> Vec<f64> {
    params.encoder_weights.apply(state).into_iter().map(f64::tanh).collect()
}

pub fn encode_observation(state: &[f64], params: &PolicyParams, h_policy: &ZZHamiltonian) -> Result<Vec<f64>> {
    HybridPolicy::new(params.shape, h_policy)?.encode_observation(state, params)
}

pub fn policy_forward(
    state: &[f64],
    params: &PolicyParams,
    h_policy: &ZZHamiltonian,
    mask: &[bool],
) -> Result<ActionDistribution> {
    HybridPolicy::new(params.shape, h_policy)?.forward(state, params, mask)
}
