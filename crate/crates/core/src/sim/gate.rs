use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    H,
    Rx,
    Ry,
    Rz,
    Cnot,
    Rzz,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::Rx | GateKind::Ry | GateKind::Rz => 1,
            GateKind::Cnot | GateKind::Rzz => 2,
        }
    }

    /// Rotation gates take an angle; `H` and `CNOT` do not.
    pub fn is_parametric(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Ry | GateKind::Rz | GateKind::Rzz)
    }
}

/// A concrete gate with a bound angle.
///
/// Rotations follow `R_G(θ) = exp(-iθG/2)` for `G ∈ {X, Y, Z, Z⊗Z}`. For
/// `CNOT` the first target is the control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateOp {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
}

impl GateOp {
    pub fn h(q: usize) -> Self {
        Self { kind: GateKind::H, targets: vec![q], angle: None }
    }

    pub fn rx(q: usize, theta: f64) -> Self {
        Self { kind: GateKind::Rx, targets: vec![q], angle: Some(theta) }
    }

    pub fn ry(q: usize, theta: f64) -> Self {
        Self { kind: GateKind::Ry, targets: vec![q], angle: Some(theta) }
    }

    pub fn rz(q: usize, theta: f64) -> Self {
        Self { kind: GateKind::Rz, targets: vec![q], angle: Some(theta) }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self { kind: GateKind::Cnot, targets: vec![control, target], angle: None }
    }

    pub fn rzz(a: usize, b: usize, theta: f64) -> Self {
        Self { kind: GateKind::Rzz, targets: vec![a, b], angle: Some(theta) }
    }

    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        validate_shape(self.kind, &self.targets, n_qubits)?;
        match (self.kind.is_parametric(), self.angle) {
            (true, Some(a)) if a.is_finite() => Ok(()),
            (true, Some(_)) => Err(Error::InvalidGate(format!("{:?} angle is not finite", self.kind))),
            (true, None) => Err(Error::InvalidGate(format!("{:?} requires an angle", self.kind))),
            (false, Some(_)) => Err(Error::InvalidGate(format!("{:?} takes no angle", self.kind))),
            (false, None) => Ok(()),
        }
    }
}

pub(crate) fn validate_shape(kind: GateKind, targets: &[usize], n_qubits: usize) -> Result<()> {
    if targets.len() != kind.arity() {
        return Err(Error::InvalidGate(format!("{kind:?} expects {} target(s), got {}", kind.arity(), targets.len())));
    }
    for &t in targets {
        if t >= n_qubits {
            return Err(Error::QubitIndex { index: t, n_qubits });
        }
    }
    if targets.len() == 2 && targets[0] == targets[1] {
        return Err(Error::InvalidGate(format!("{kind:?} targets must be distinct")));
    }
    Ok(())
}
