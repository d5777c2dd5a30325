use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One `w · Z_i Z_j` term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZzTerm {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Weighted sum of `Z_i Z_j` couplings with weights normalized into `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawHamiltonian")]
pub struct ZZHamiltonian {
    n_qubits: usize,
    terms: Vec<ZzTerm>,
}

#[derive(Deserialize)]
struct RawHamiltonian {
    n_qubits: usize,
    terms: Vec<ZzTerm>,
}

impl TryFrom<RawHamiltonian> for ZZHamiltonian {
    type Error = Error;

    fn try_from(raw: RawHamiltonian) -> Result<Self> {
        Self::new(raw.n_qubits, raw.terms)
    }
}

impl ZZHamiltonian {
    pub fn new(n_qubits: usize, terms: Vec<ZzTerm>) -> Result<Self> {
        for t in &terms {
            if !(t.i < t.j && t.j < n_qubits) {
                return Err(Error::InvalidParameter(format!(
                    "term ({}, {}) violates 0 <= i < j < {n_qubits}",
                    t.i, t.j
                )));
            }
            if !(0.0..=1.0).contains(&t.weight) {
                return Err(Error::InvalidParameter(format!(
                    "term ({}, {}) weight {} outside [0, 1]",
                    t.i, t.j, t.weight
                )));
            }
        }
        Ok(Self { n_qubits, terms })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[ZzTerm] {
        &self.terms
    }

    pub fn total_weight(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum()
    }

    /// Eigenvalue of the operator on computational basis state `index`.
    pub fn diagonal(&self, index: usize) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let parity = ((index >> t.i) ^ (index >> t.j)) & 1;
                if parity == 0 {
                    t.weight
                } else {
                    -t.weight
                }
            })
            .sum()
    }

    /// Same terms placed on a larger register.
    pub fn embed(&self, n_qubits: usize) -> Result<Self> {
        if n_qubits < self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, got: n_qubits });
        }
        Ok(Self { n_qubits, terms: self.terms.clone() })
    }
}
