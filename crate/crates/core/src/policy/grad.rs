use std::f64::consts::PI;

use super::{HybridPolicy, PolicyParams, ValueParams};
use crate::env::Trajectory;
use crate::error::{Error, Result};
use crate::sim::parameter_shift_jacobian;

/// Flat gradients (layouts of [`PolicyParams::to_flat`] and
/// [`ValueParams::to_flat`]) with the losses they differentiate.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub policy: Vec<f64>,
    pub value: Vec<f64>,
    pub policy_loss: f64,
    pub value_loss: f64,
}

/// REINFORCE with an optional learned baseline.
///
/// `policy_loss = −Σ_t log π(a_t|s_t) · A_t` with `A_t = Ĝ_t − V(s_t)`
/// (`A_t = Ĝ_t` when `use_baseline` is false); `V` is held constant in the
/// policy gradient. `value_loss = mean_t (V(s_t) − Ĝ_t)²`.
///
/// Circuit-angle derivatives come from the parameter-shift Jacobian of the
/// readouts; encoder, head and value derivatives are backpropagated
/// analytically.
pub fn reinforce_gradients(
    traj: &Trajectory,
    policy: &HybridPolicy,
    params: &PolicyParams,
    value: &ValueParams,
    use_baseline: bool,
) -> Result<Gradients> {
    if traj.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    let shape = policy.shape();
    let q = shape.n_qubits;
    let d = shape.state_dim();
    let n = shape.n_customers;
    let n_circuit = policy.circuit().n_params();

    let mut enc_w = vec![vec![0.0; d]; q];
    let mut enc_b = vec![0.0; q];
    let mut circ = vec![0.0; n_circuit - q];
    let mut head_w = vec![vec![0.0; q]; n];
    let mut head_b = vec![0.0; n];
    let mut policy_loss = 0.0;

    let mut v_hidden_w = vec![vec![0.0; d]; value.hidden.outputs()];
    let mut v_hidden_b = vec![0.0; value.hidden.outputs()];
    let mut v_out_w = vec![0.0; value.output.inputs()];
    let mut v_out_b = 0.0;
    let mut value_loss = 0.0;
    let t_len = traj.len() as f64;

    for t in 0..traj.len() {
        let s = &traj.states[t];
        let target = traj.normalized_returns[t];

        let (hidden, v) = value.forward(s)?;
        let err = v - target;
        value_loss += err * err / t_len;
        let dv = 2.0 * err / t_len;
        v_out_b += dv;
        for (j, h) in hidden.iter().enumerate() {
            v_out_w[j] += dv * h;
            let dpre = dv * value.output.weights[0][j] * (1.0 - h * h);
            v_hidden_b[j] += dpre;
            for (g, x) in v_hidden_w[j].iter_mut().zip(s) {
                *g += dpre * x;
            }
        }

        let advantage = if use_baseline { target - v } else { target };
        let trace = policy.trace(s, params, &traj.masks[t])?;
        let a = traj.actions[t];
        let p_a = trace.dist.probabilities[a];
        if !trace.dist.mask[a] || p_a <= 0.0 {
            return Err(Error::InvalidParameter(format!("action {a} at step {t} has zero probability")));
        }
        policy_loss -= p_a.ln() * advantage;

        // d loss / d logit_i = −A (1[i = a] − p_i) on unmasked entries
        let g_logit: Vec<f64> = trace
            .dist
            .probabilities
            .iter()
            .enumerate()
            .map(|(i, &p)| if !trace.dist.mask[i] { 0.0 } else { -advantage * (f64::from(u8::from(i == a)) - p) })
            .collect();
        if g_logit.iter().all(|&g| g == 0.0) {
            continue;
        }

        let mut g_readout = vec![0.0; q];
        for i in 0..n {
            head_b[i] += g_logit[i];
            for k in 0..q {
                head_w[i][k] += g_logit[i] * trace.readout[k];
                g_readout[k] += params.head_weights.weights[i][k] * g_logit[i];
            }
        }

        let jac = parameter_shift_jacobian(policy.circuit(), &trace.circuit_params, policy.observables())?;
        let mut g_slot = vec![0.0; n_circuit];
        for (row, gr) in jac.iter().zip(&g_readout) {
            for (g, j) in g_slot.iter_mut().zip(row) {
                *g += gr * j;
            }
        }
        for k in 0..q {
            let u = trace.squashed[k];
            let dz = g_slot[k] * PI * (1.0 - u * u);
            enc_b[k] += dz;
            for (g, x) in enc_w[k].iter_mut().zip(s) {
                *g += dz * x;
            }
        }
        for (c, g) in circ.iter_mut().zip(&g_slot[q..]) {
            *c += g;
        }
    }

    let mut policy_grad = Vec::with_capacity(params.len());
    policy_grad.extend(enc_w.into_iter().flatten());
    policy_grad.extend(enc_b);
    policy_grad.extend(circ);
    policy_grad.extend(head_w.into_iter().flatten());
    policy_grad.extend(head_b);

    let mut value_grad = Vec::with_capacity(value.len());
    value_grad.extend(v_hidden_w.into_iter().flatten());
    value_grad.extend(v_hidden_b);
    value_grad.extend(v_out_w);
    value_grad.push(v_out_b);

    if !policy_loss.is_finite() || !value_loss.is_finite() {
        return Err(Error::NonFinite(format!("loss (policy {policy_loss}, value {value_loss})")));
    }
    if policy_grad.iter().chain(&value_grad).any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient".into()));
    }
    Ok(Gradients { policy: policy_grad, value: value_grad, policy_loss, value_loss })
}
