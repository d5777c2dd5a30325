//! Dense statevector simulation for small registers.
//!
//! All rotations use the `exp(-iθG/2)` convention, so the cost layer
//! `exp(-iγ Σ w Z_i Z_j)` is realised as `RZZ(2γw)` per term and the mixer
//! `exp(-iβ Σ X_i)` as `RX(2β)` per qubit.

mod circuit;
mod gate;
mod hamiltonian;
mod state;

pub use circuit::{
    circuit_metrics, expectations, parameter_shift_gradient, parameter_shift_jacobian, Circuit, CircuitGate,
    CircuitMetrics, Observable,
};
pub use gate::{GateKind, GateOp};
pub use hamiltonian::{ZZHamiltonian, ZzTerm};
pub use num_complex::Complex64;
pub use state::{apply_cost_layer, apply_gate, apply_mixer_layer, init_plus_state, Readout, StateVector, MAX_QUBITS};
