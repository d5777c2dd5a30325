use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::gate::{validate_shape, GateKind, GateOp};
use super::hamiltonian::ZZHamiltonian;
use super::state::StateVector;
use crate::error::{Error, Result};

/// A gate whose angle is either fixed or read from a parameter slot.
///
/// A slotted gate has angle `scale * params[slot]`, which lets several gates
/// share one trainable parameter (a QAOA cost layer uses `RZZ(2γw)` for every
/// term with the same `γ`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitGate {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<usize>,
    #[serde(default = "unit_scale")]
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

fn unit_scale() -> f64 {
    1.0
}

impl CircuitGate {
    fn bound_angle(&self, params: &[f64]) -> f64 {
        match self.slot {
            Some(k) => self.scale * params[k],
            None => self.angle.unwrap_or(0.0),
        }
    }
}

/// Ordered gate list over a fixed register, evaluated from `|0…0⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    n_params: usize,
    gates: Vec<CircuitGate>,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, n_params: 0, gates: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn gates(&self) -> &[CircuitGate] {
        &self.gates
    }

    pub fn push(&mut self, gate: GateOp) -> Result<&mut Self> {
        gate.validate(self.n_qubits)?;
        self.gates.push(CircuitGate {
            kind: gate.kind,
            targets: gate.targets,
            slot: None,
            scale: 1.0,
            angle: gate.angle,
        });
        Ok(self)
    }

    /// Appends a rotation whose angle is `scale * params[slot]`.
    pub fn push_param(&mut self, kind: GateKind, targets: &[usize], slot: usize, scale: f64) -> Result<&mut Self> {
        if !kind.is_parametric() {
            return Err(Error::InvalidGate(format!("{kind:?} cannot carry a parameter")));
        }
        validate_shape(kind, targets, self.n_qubits)?;
        self.gates.push(CircuitGate { kind, targets: targets.to_vec(), slot: Some(slot), scale, angle: None });
        self.n_params = self.n_params.max(slot + 1);
        Ok(self)
    }

    /// Binds parameters into concrete gates.
    pub fn bind(&self, params: &[f64]) -> Result<Vec<GateOp>> {
        self.check_params(params)?;
        Ok(self
            .gates
            .iter()
            .map(|g| GateOp {
                kind: g.kind,
                targets: g.targets.clone(),
                angle: g.kind.is_parametric().then(|| g.bound_angle(params)),
            })
            .collect())
    }

    pub fn run(&self, params: &[f64]) -> Result<StateVector> {
        self.check_params(params)?;
        let mut state = StateVector::zero(self.n_qubits)?;
        self.run_range(&mut state, 0, params);
        Ok(state)
    }

    fn run_range(&self, state: &mut StateVector, from: usize, params: &[f64]) {
        for g in &self.gates[from..] {
            state.apply_unchecked(g.kind, &g.targets, g.bound_angle(params));
        }
    }

    pub fn metrics(&self) -> CircuitMetrics {
        let mut m = metrics_of(self.gates.iter().map(|g| g.targets.as_slice()), self.n_qubits);
        m.qubit_count = self.n_qubits;
        m
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::DimensionMismatch { expected: self.n_params, got: params.len() });
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::NonFinite(format!("circuit parameter {i}")));
        }
        Ok(())
    }
}

/// Observable measured at the end of a circuit.
#[derive(Clone, Debug, PartialEq)]
pub enum Observable {
    Z(usize),
    Zz(ZZHamiltonian),
}

impl Observable {
    pub fn expectation(&self, state: &StateVector) -> Result<f64> {
        match self {
            Observable::Z(q) => state.expectation_z(*q),
            Observable::Zz(h) => state.expectation_zz(h),
        }
    }

    fn validate(&self, n_qubits: usize) -> Result<()> {
        match self {
            Observable::Z(q) if *q >= n_qubits => Err(Error::QubitIndex { index: *q, n_qubits }),
            Observable::Zz(h) if h.n_qubits() != n_qubits => {
                Err(Error::DimensionMismatch { expected: n_qubits, got: h.n_qubits() })
            }
            _ => Ok(()),
        }
    }

    fn eval_unchecked(&self, state: &StateVector) -> f64 {
        match self {
            Observable::Z(q) => state.z_unchecked(*q),
            Observable::Zz(h) => state.zz_unchecked(h),
        }
    }
}

/// Expectation of every observable on the circuit output.
pub fn expectations(circuit: &Circuit, params: &[f64], observables: &[Observable]) -> Result<Vec<f64>> {
    for o in observables {
        o.validate(circuit.n_qubits)?;
    }
    let state = circuit.run(params)?;
    Ok(observables.iter().map(|o| o.eval_unchecked(&state)).collect())
}

/// Jacobian `d⟨O_r⟩/dθ_k` by the two-term parameter-shift rule.
///
/// Each slotted gate occurrence is shifted by `±π/2` in its own angle and the
/// contributions are accumulated into its slot with the chain factor `scale`.
/// Rows follow `observables`, columns follow parameter slots.
pub fn parameter_shift_jacobian(
    circuit: &Circuit,
    params: &[f64],
    observables: &[Observable],
) -> Result<Vec<Vec<f64>>> {
    circuit.check_params(params)?;
    if circuit.n_params == 0 {
        return Err(Error::InvalidParameter("circuit has no parameters".into()));
    }
    for o in observables {
        o.validate(circuit.n_qubits)?;
    }
    let mut jac = vec![vec![0.0; circuit.n_params]; observables.len()];
    let mut prefix = StateVector::zero(circuit.n_qubits)?;
    for (idx, g) in circuit.gates.iter().enumerate() {
        let angle = g.bound_angle(params);
        if let Some(slot) = g.slot {
            if !g.kind.is_parametric() {
                return Err(Error::InvalidGate(format!("{:?} cannot be differentiated", g.kind)));
            }
            let mut plus = prefix.clone();
            plus.apply_unchecked(g.kind, &g.targets, angle + FRAC_PI_2);
            circuit.run_range(&mut plus, idx + 1, params);
            let mut minus = prefix.clone();
            minus.apply_unchecked(g.kind, &g.targets, angle - FRAC_PI_2);
            circuit.run_range(&mut minus, idx + 1, params);
            for (row, o) in jac.iter_mut().zip(observables) {
                let diff = o.eval_unchecked(&plus) - o.eval_unchecked(&minus);
                row[slot] += g.scale * diff / 2.0;
            }
        }
        prefix.apply_unchecked(g.kind, &g.targets, angle);
    }
    Ok(jac)
}

pub fn parameter_shift_gradient(circuit: &Circuit, params: &[f64], observable: &Observable) -> Result<Vec<f64>> {
    let mut jac = parameter_shift_jacobian(circuit, params, std::slice::from_ref(observable))?;
    Ok(jac.remove(0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitMetrics {
    pub depth: usize,
    pub qubit_count: usize,
    pub gate_count: usize,
}

/// Depth is the longest chain of gates linked through shared qubits.
/// `qubit_count` is the number of distinct qubits touched.
pub fn circuit_metrics(gates: &[GateOp]) -> CircuitMetrics {
    let n = gates.iter().flat_map(|g| g.targets.iter().copied()).max().map_or(0, |m| m + 1);
    metrics_of(gates.iter().map(|g| g.targets.as_slice()), n)
}

fn metrics_of<'a>(targets: impl Iterator<Item = &'a [usize]>, n_qubits: usize) -> CircuitMetrics {
    let mut level = vec![0usize; n_qubits];
    let mut touched = vec![false; n_qubits];
    let mut gate_count = 0;
    for t in targets {
        gate_count += 1;
        let next = t.iter().map(|&q| level[q]).max().unwrap_or(0) + 1;
        for &q in t {
            level[q] = next;
            touched[q] = true;
        }
    }
    CircuitMetrics {
        depth: level.into_iter().max().unwrap_or(0),
        qubit_count: touched.into_iter().filter(|&b| b).count(),
        gate_count,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ry_z_circuit() -> Circuit {
        let mut c = Circuit::new(1);
        c.push_param(GateKind::Ry, &[0], 0, 1.0).unwrap();
        c
    }

    #[test]
    fn shift_rule_on_single_rotation() {
        let c = ry_z_circuit();
        let g = parameter_shift_gradient(&c, &[0.0], &Observable::Z(0)).unwrap();
        assert!(g[0].abs() < 1e-15);
        let g = parameter_shift_gradient(&c, &[FRAC_PI_2], &Observable::Z(0)).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn shift_rule_errors() {
        let mut c = Circuit::new(2);
        c.push(GateOp::h(0)).unwrap();
        assert!(parameter_shift_gradient(&c, &[], &Observable::Z(0)).is_err());
        assert!(c.push_param(GateKind::H, &[0], 0, 1.0).is_err());
        assert!(c.push_param(GateKind::Cnot, &[0, 1], 0, 1.0).is_err());
        let c = ry_z_circuit();
        assert!(parameter_shift_gradient(&c, &[0.1, 0.2], &Observable::Z(0)).is_err());
        assert!(parameter_shift_gradient(&c, &[0.1], &Observable::Z(3)).is_err());
    }

    #[test]
    fn metrics_examples() {
        assert_eq!(circuit_metrics(&[]).depth, 0);
        let seq = vec![GateOp::h(0), GateOp::rx(0, 0.1), GateOp::rz(0, 0.2)];
        let m = circuit_metrics(&seq);
        assert_eq!((m.depth, m.qubit_count, m.gate_count), (3, 1, 3));
        let par = vec![GateOp::h(0), GateOp::h(1), GateOp::cnot(0, 1), GateOp::h(2)];
        assert_eq!(circuit_metrics(&par).depth, 2);
    }

    #[test]
    fn json_round_trip() {
        let mut c = Circuit::new(2);
        c.push(GateOp::h(0)).unwrap();
        c.push_param(GateKind::Rzz, &[0, 1], 0, 2.0).unwrap();
        c.push(GateOp::cnot(0, 1)).unwrap();
        let json = c.to_json().unwrap();
        assert!(json.contains("\"RZZ\"") && json.contains("\"slot\": 0"));
        let back: Circuit = serde_json::from_str(&json).unwrap();
        assert_eq!(back, c);
    }
}
