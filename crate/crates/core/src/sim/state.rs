use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gate::{GateKind, GateOp};
use super::hamiltonian::ZZHamiltonian;
use crate::error::{Error, Result};

pub const MAX_QUBITS: usize = 20;

/// Tolerance on `|‖ψ‖² − 1|` accepted as normalized input.
const NORM_TOLERANCE: f64 = 1e-8;

/// Dense statevector. Qubit `q` is bit `q` of the basis index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩`
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1usize << n_qubits;
        if index >= dim {
            return Err(Error::DimensionMismatch { expected: dim, got: index });
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); dim];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(Self { n_qubits, amplitudes })
    }

    /// `|+⟩^⊗n`
    pub fn plus(n_qubits: usize) -> Result<Self> {
        check_register(n_qubits)?;
        let dim = 1usize << n_qubits;
        let a = (dim as f64).sqrt().recip();
        Ok(Self { n_qubits, amplitudes: vec![Complex64::new(a, 0.0); dim] })
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let dim = amplitudes.len();
        if !dim.is_power_of_two() {
            return Err(Error::InvalidParameter(format!("{dim} amplitudes is not a power of two")));
        }
        let n_qubits = dim.trailing_zeros() as usize;
        check_register(n_qubits)?;
        let state = Self { n_qubits, amplitudes };
        state.check_normalized()?;
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probability(&self, index: usize) -> f64 {
        self.amplitudes.get(index).map_or(0.0, |a| a.norm_sqr())
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn check_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized(n));
        }
        Ok(())
    }

    pub fn apply(&mut self, gate: &GateOp) -> Result<()> {
        gate.validate(self.n_qubits)?;
        self.check_normalized()?;
        self.apply_unchecked(gate.kind, &gate.targets, gate.angle.unwrap_or(0.0));
        Ok(())
    }

    /// Applies a gate whose shape was validated elsewhere.
    pub(crate) fn apply_unchecked(&mut self, kind: GateKind, targets: &[usize], angle: f64) {
        match kind {
            GateKind::H => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                let s = Complex64::new(s, 0.0);
                self.apply_1q(targets[0], [[s, s], [s, -s]]);
            }
            GateKind::Rx => {
                let (c, s) = half_angle(angle);
                let c = Complex64::new(c, 0.0);
                let ms = Complex64::new(0.0, -s);
                self.apply_1q(targets[0], [[c, ms], [ms, c]]);
            }
            GateKind::Ry => {
                let (c, s) = half_angle(angle);
                let c = Complex64::new(c, 0.0);
                self.apply_1q(targets[0], [[c, Complex64::new(-s, 0.0)], [Complex64::new(s, 0.0), c]]);
            }
            GateKind::Rz => {
                let q = targets[0];
                let p0 = Complex64::from_polar(1.0, -angle / 2.0);
                let p1 = Complex64::from_polar(1.0, angle / 2.0);
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    *a *= if (i >> q) & 1 == 0 { p0 } else { p1 };
                }
            }
            GateKind::Cnot => {
                let (c, t) = (targets[0], targets[1]);
                let tmask = 1usize << t;
                for i in 0..self.amplitudes.len() {
                    if (i >> c) & 1 == 1 && i & tmask == 0 {
                        self.amplitudes.swap(i, i | tmask);
                    }
                }
            }
            GateKind::Rzz => {
                let (a, b) = (targets[0], targets[1]);
                let even = Complex64::from_polar(1.0, -angle / 2.0);
                let odd = Complex64::from_polar(1.0, angle / 2.0);
                for (i, amp) in self.amplitudes.iter_mut().enumerate() {
                    *amp *= if ((i >> a) ^ (i >> b)) & 1 == 0 { even } else { odd };
                }
            }
        }
    }

    fn apply_1q(&mut self, q: usize, u: [[Complex64; 2]; 2]) {
        let mask = 1usize << q;
        for i in 0..self.amplitudes.len() {
            if i & mask == 0 {
                let j = i | mask;
                let (a, b) = (self.amplitudes[i], self.amplitudes[j]);
                self.amplitudes[i] = u[0][0] * a + u[0][1] * b;
                self.amplitudes[j] = u[1][0] * a + u[1][1] * b;
            }
        }
    }

    /// `exp(-iγ H_C)`, applied as `RZZ(2γw)` per term.
    pub fn apply_cost_layer(&mut self, h: &ZZHamiltonian, gamma: f64) -> Result<()> {
        self.check_dims(h)?;
        self.check_normalized()?;
        for t in h.terms() {
            self.apply_unchecked(GateKind::Rzz, &[t.i, t.j], 2.0 * gamma * t.weight);
        }
        Ok(())
    }

    /// `exp(-iβ Σ X_i)`, applied as `RX(2β)` on every qubit.
    pub fn apply_mixer_layer(&mut self, beta: f64) -> Result<()> {
        self.check_normalized()?;
        for q in 0..self.n_qubits {
            self.apply_unchecked(GateKind::Rx, &[q], 2.0 * beta);
        }
        Ok(())
    }

    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex { index: qubit, n_qubits: self.n_qubits });
        }
        Ok(self.z_unchecked(qubit))
    }

    pub(crate) fn z_unchecked(&self, qubit: usize) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| if (i >> qubit) & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    pub fn expectation_zz(&self, h: &ZZHamiltonian) -> Result<f64> {
        self.check_dims(h)?;
        Ok(self.zz_unchecked(h))
    }

    pub(crate) fn zz_unchecked(&self, h: &ZZHamiltonian) -> f64 {
        self.amplitudes.iter().enumerate().map(|(i, a)| a.norm_sqr() * h.diagonal(i)).sum()
    }

    /// Draws `shots` computational-basis outcomes.
    pub fn sample<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Vec<usize> {
        let probs = self.probabilities();
        (0..shots)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return i;
                    }
                }
                probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
            })
            .collect()
    }

    fn check_dims(&self, h: &ZZHamiltonian) -> Result<()> {
        if h.n_qubits() != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, got: h.n_qubits() });
        }
        Ok(())
    }
}

fn half_angle(theta: f64) -> (f64, f64) {
    let (s, c) = (theta / 2.0).sin_cos();
    (c, s)
}

fn check_register(n_qubits: usize) -> Result<()> {
    if n_qubits == 0 || n_qubits > MAX_QUBITS {
        return Err(Error::RegisterSize(n_qubits));
    }
    Ok(())
}

/// How expectation values are read out of a state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Readout {
    #[default]
    Exact,
    Shots(usize),
}

impl Readout {
    pub fn z<R: Rng + ?Sized>(self, state: &StateVector, qubit: usize, rng: &mut R) -> Result<f64> {
        match self {
            Readout::Exact => state.expectation_z(qubit),
            Readout::Shots(0) => Err(Error::InvalidParameter("zero shots".into())),
            Readout::Shots(n) => {
                if qubit >= state.n_qubits() {
                    return Err(Error::QubitIndex { index: qubit, n_qubits: state.n_qubits() });
                }
                let sum: f64 =
                    state.sample(n, rng).into_iter().map(|b| if (b >> qubit) & 1 == 0 { 1.0 } else { -1.0 }).sum();
                Ok(sum / n as f64)
            }
        }
    }
}

pub fn init_plus_state(n_qubits: usize) -> Result<StateVector> {
    StateVector::plus(n_qubits)
}

pub fn apply_gate(mut state: StateVector, gate: &GateOp) -> Result<StateVector> {
    state.apply(gate)?;
    Ok(state)
}

pub fn apply_cost_layer(mut state: StateVector, h: &ZZHamiltonian, gamma: f64) -> Result<StateVector> {
    state.apply_cost_layer(h, gamma)?;
    Ok(state)
}

pub fn apply_mixer_layer(mut state: StateVector, beta: f64) -> Result<StateVector> {
    state.apply_mixer_layer(beta)?;
    Ok(state)
}
