use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_QUBITS: usize = 4;
pub const N_LAYERS: usize = 2;
pub const VALUE_HIDDEN: usize = 32;

/// Standard deviation for rotation and random-init QAOA angles.
pub const ANGLE_INIT_STD: f64 = 0.1;

/// Problem and circuit sizes a parameter set is built for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyShape {
    pub n_customers: usize,
    pub n_vehicles: usize,
    pub n_qubits: usize,
    pub n_layers: usize,
}

impl PolicyShape {
    pub fn new(n_customers: usize, n_vehicles: usize) -> Self {
        Self { n_customers, n_vehicles, n_qubits: N_QUBITS, n_layers: N_LAYERS }
    }

    pub fn state_dim(&self) -> usize {
        2 * self.n_vehicles + 3 * self.n_customers
    }
}

/// Affine map `y = W x + b`; `weights` is row-major with one row per output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Affine {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl Affine {
    pub fn zeros(outputs: usize, inputs: usize) -> Self {
        Self { weights: vec![vec![0.0; inputs]; outputs], bias: vec![0.0; outputs] }
    }

    pub fn random<R: Rng + ?Sized>(outputs: usize, inputs: usize, std: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, std).expect("finite std");
        let weights = (0..outputs).map(|_| (0..inputs).map(|_| normal.sample(rng)).collect()).collect();
        Self { weights, bias: vec![0.0; outputs] }
    }

    pub fn outputs(&self) -> usize {
        self.bias.len()
    }

    pub fn inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    fn len(&self) -> usize {
        self.outputs() * (self.inputs() + 1)
    }

    fn check(&self, outputs: usize, inputs: usize, what: &str) -> Result<()> {
        if self.bias.len() != outputs || self.weights.len() != outputs || self.weights.iter().any(|r| r.len() != inputs)
        {
            return Err(Error::InvalidParameter(format!("{what} must be {outputs}x{inputs} with {outputs} biases")));
        }
        check_finite(self.weights.iter().flatten().chain(&self.bias), what)
    }

    fn write_flat(&self, out: &mut Vec<f64>) {
        out.extend(self.weights.iter().flatten());
        out.extend(&self.bias);
    }

    fn read_flat(&mut self, src: &mut std::slice::Iter<'_, f64>) {
        for v in self.weights.iter_mut().flatten().chain(self.bias.iter_mut()) {
            *v = *src.next().expect("flat length checked");
        }
    }
}

fn check_finite<'a>(values: impl IntoIterator<Item = &'a f64>, what: &str) -> Result<()> {
    if values.into_iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Trainable parameters of the hybrid policy.
///
/// Flat layout (used by gradients and the optimizer): encoder weights and
/// bias, rotation angles `[layer][qubit][RY, RZ]`, QAOA angles
/// `[layer][γ, β]`, head weights and bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub shape: PolicyShape,
    pub encoder_weights: Affine,
    pub rotation_angles: Vec<Vec<[f64; 2]>>,
    pub qaoa_angles: Vec<[f64; 2]>,
    pub head_weights: Affine,
}

/// Init scales for the classical layers.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitScales {
    pub encoder_std: f64,
    pub head_std: f64,
}

impl Default for InitScales {
    fn default() -> Self {
        Self { encoder_std: 0.1, head_std: 10.0 }
    }
}

impl PolicyParams {
    pub fn zeros(shape: PolicyShape) -> Self {
        Self {
            shape,
            encoder_weights: Affine::zeros(shape.n_qubits, shape.state_dim()),
            rotation_angles: vec![vec![[0.0; 2]; shape.n_qubits]; shape.n_layers],
            qaoa_angles: vec![[0.0; 2]; shape.n_layers],
            head_weights: Affine::zeros(shape.n_customers, shape.n_qubits),
        }
    }

    /// Seeded init: encoder weights `N(0, σ_e²/D)`, head weights `N(0, σ_h²)`,
    /// all angles `N(0, 0.1²)`, zero biases.
    pub fn random<R: Rng + ?Sized>(shape: PolicyShape, scales: InitScales, rng: &mut R) -> Self {
        let d = shape.state_dim();
        let encoder_weights = Affine::random(shape.n_qubits, d, scales.encoder_std / (d as f64).sqrt(), rng);
        let angle = Normal::new(0.0, ANGLE_INIT_STD).expect("finite std");
        let rotation_angles = (0..shape.n_layers)
            .map(|_| (0..shape.n_qubits).map(|_| [angle.sample(rng), angle.sample(rng)]).collect())
            .collect();
        let qaoa_angles = (0..shape.n_layers).map(|_| [angle.sample(rng), angle.sample(rng)]).collect();
        let head_weights = Affine::random(shape.n_customers, shape.n_qubits, scales.head_std, rng);
        Self { shape, encoder_weights, rotation_angles, qaoa_angles, head_weights }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.shape;
        self.encoder_weights.check(s.n_qubits, s.state_dim(), "encoder_weights")?;
        self.head_weights.check(s.n_customers, s.n_qubits, "head_weights")?;
        if self.rotation_angles.len() != s.n_layers
            || self.rotation_angles.iter().any(|l| l.len() != s.n_qubits)
            || self.qaoa_angles.len() != s.n_layers
        {
            return Err(Error::InvalidParameter("angle arrays do not match the shape".into()));
        }
        check_finite(self.rotation_angles.iter().flatten().flatten(), "rotation_angles")?;
        check_finite(self.qaoa_angles.iter().flatten(), "qaoa_angles")
    }

    pub fn len(&self) -> usize {
        self.encoder_weights.len()
            + self.shape.n_layers * self.shape.n_qubits * 2
            + self.shape.n_layers * 2
            + self.head_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Circuit angles excluding the data-loading rotations.
    pub fn circuit_angles(&self) -> impl Iterator<Item = f64> + '_ {
        self.rotation_angles.iter().flatten().flatten().chain(self.qaoa_angles.iter().flatten()).copied()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.encoder_weights.write_flat(&mut out);
        out.extend(self.circuit_angles());
        self.head_weights.write_flat(&mut out);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: flat.len() });
        }
        let mut it = flat.iter();
        self.encoder_weights.read_flat(&mut it);
        for v in self.rotation_angles.iter_mut().flatten().flatten().chain(self.qaoa_angles.iter_mut().flatten()) {
            *v = *it.next().expect("length checked");
        }
        self.head_weights.read_flat(&mut it);
        Ok(())
    }

    /// Range of the flat vector holding circuit angles.
    pub fn quantum_range(&self) -> std::ops::Range<usize> {
        let start = self.encoder_weights.len();
        start..start + self.shape.n_layers * (self.shape.n_qubits * 2 + 2)
    }

    /// Per-entry step sizes: `quantum_lr` for circuit angles, `classical_lr`
    /// elsewhere.
    pub fn learning_rates(&self, quantum_lr: f64, classical_lr: f64) -> Vec<f64> {
        let q = self.quantum_range();
        (0..self.len()).map(|i| if q.contains(&i) { quantum_lr } else { classical_lr }).collect()
    }
}

/// One-hidden-layer tanh value network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueParams {
    pub hidden: Affine,
    pub output: Affine,
}

impl ValueParams {
    pub fn zeros(state_dim: usize) -> Self {
        Self { hidden: Affine::zeros(VALUE_HIDDEN, state_dim), output: Affine::zeros(1, VALUE_HIDDEN) }
    }

    /// Scaled-normal init (`1/√fan_in`) with zero biases.
    pub fn random<R: Rng + ?Sized>(state_dim: usize, rng: &mut R) -> Self {
        Self {
            hidden: Affine::random(VALUE_HIDDEN, state_dim, (state_dim as f64).sqrt().recip(), rng),
            output: Affine::random(1, VALUE_HIDDEN, (VALUE_HIDDEN as f64).sqrt().recip(), rng),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.hidden.inputs()
    }

    pub fn validate(&self) -> Result<()> {
        self.hidden.check(VALUE_HIDDEN, self.state_dim(), "value hidden layer")?;
        self.output.check(1, VALUE_HIDDEN, "value output layer")
    }

    pub fn len(&self) -> usize {
        self.hidden.len() + self.output.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.hidden.write_flat(&mut out);
        self.output.write_flat(&mut out);
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: flat.len() });
        }
        let mut it = flat.iter();
        self.hidden.read_flat(&mut it);
        self.output.read_flat(&mut it);
        Ok(())
    }

    /// Hidden activations and scalar output.
    pub fn forward(&self, state: &[f64]) -> Result<(Vec<f64>, f64)> {
        if state.len() != self.state_dim() {
            return Err(Error::DimensionMismatch { expected: self.state_dim(), got: state.len() });
        }
        let hidden: Vec<f64> = self.hidden.apply(state).into_iter().map(f64::tanh).collect();
        let out = self.output.apply(&hidden)[0];
        Ok((hidden, out))
    }
}

pub fn value_forward(state: &[f64], params: &ValueParams) -> Result<f64> {
    params.forward(state).map(|(_, v)| v)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn flat_round_trip_and_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let shape = PolicyShape::new(8, 2);
        let p = PolicyParams::random(shape, InitScales::default(), &mut rng);
        p.validate().unwrap();
        let flat = p.to_flat();
        assert_eq!(flat.len(), 4 * 29 + 16 + 4 + 8 * 5);
        let mut q = PolicyParams::zeros(shape);
        q.set_flat(&flat).unwrap();
        assert_eq!(p, q);
        let r = p.quantum_range();
        assert_eq!(r, 116..136);
        let lrs = p.learning_rates(0.01, 0.001);
        assert_eq!(lrs.iter().filter(|&&l| l == 0.01).count(), 20);
        assert!(q.set_flat(&flat[1..]).is_err());
    }

    #[test]
    fn value_examples() {
        let mut v = ValueParams::zeros(6);
        v.output.bias[0] = 0.25;
        assert_eq!(value_forward(&[1.0; 6], &v).unwrap(), 0.25);
        assert!(value_forward(&[1.0; 5], &v).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut v = ValueParams::random(6, &mut rng);
        for w in v.hidden.weights.iter_mut().flatten() {
            *w *= 50.0;
        }
        let (h, out) = v.forward(&[0.9, -0.3, 0.1, 1.0, 0.0, 1.0]).unwrap();
        assert!(h.iter().all(|x| x.abs() <= 1.0));
        assert_eq!(out, v.forward(&[0.9, -0.3, 0.1, 1.0, 0.0, 1.0]).unwrap().1);
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        let mut p = PolicyParams::zeros(PolicyShape::new(5, 1));
        p.qaoa_angles.push([0.0, 0.0]);
        assert!(p.validate().is_err());
        let mut p = PolicyParams::zeros(PolicyShape::new(5, 1));
        p.rotation_angles[0][0][1] = f64::NAN;
        assert!(matches!(p.validate(), Err(Error::NonFinite(_))));
    }
}
