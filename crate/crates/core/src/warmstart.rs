//! QAOA warm start: a distance-weighted `ZZ` Hamiltonian over the customers
//! nearest the depot, a `p`-layer QAOA expectation, and a derivative-free
//! search for the layer angles.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{distance, VrpInstance};
use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::sim::{StateVector, ZZHamiltonian, ZzTerm};

pub const DEFAULT_MAX_ITERS: usize = 150;
const PATIENCE: usize = 10;
const PATIENCE_TOL: f64 = 1e-6;
const INITIAL_STEP: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Subgraph {
    /// Customer indices, nearest to the depot first.
    pub selected_customers: Vec<usize>,
    /// Pairwise distances divided by their maximum.
    pub pairwise_weights: Vec<Vec<f64>>,
}

impl Subgraph {
    pub fn n_sub(&self) -> usize {
        self.selected_customers.len()
    }
}

/// Picks `min(n_qubits, N)` customers closest to the depot (lower index wins
/// ties). If every selected pair coincides, all weights are zero.
pub fn build_subgraph(instance: &VrpInstance, n_qubits: usize) -> Result<Subgraph> {
    if n_qubits < 2 {
        return Err(Error::InvalidParameter(format!("n_qubits = {n_qubits}, need at least 2")));
    }
    if instance.n_customers() == 0 {
        return Err(Error::InvalidInstance("no customers".into()));
    }
    let depot = instance.depot();
    let cs = instance.customers();
    let mut order: Vec<usize> = (0..cs.len()).collect();
    order.sort_by(|&a, &b| distance(depot, cs[a]).total_cmp(&distance(depot, cs[b])));
    order.truncate(n_qubits.min(cs.len()));

    let n = order.len();
    let mut w = vec![vec![0.0; n]; n];
    let mut w_max: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = distance(cs[order[i]], cs[order[j]]);
            w[i][j] = d;
            w[j][i] = d;
            w_max = w_max.max(d);
        }
    }
    if w_max > 0.0 {
        for v in w.iter_mut().flatten() {
            *v /= w_max;
        }
    }
    Ok(Subgraph { selected_customers: order, pairwise_weights: w })
}

/// One `w_ij Z_i Z_j` term per unordered pair, in lexicographic order.
pub fn build_cost_hamiltonian(sub: &Subgraph) -> Result<ZZHamiltonian> {
    let n = sub.n_sub();
    let terms = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .map(|(i, j)| ZzTerm { i, j, weight: sub.pairwise_weights[i][j] })
        .collect();
    ZZHamiltonian::new(n, terms)
}

/// `⟨ψ(γ, β)| H_C |ψ(γ, β)⟩` with cost then mixer per layer, from `|+⟩^⊗n`.
pub fn qaoa_expectation(h: &ZZHamiltonian, gammas: &[f64], betas: &[f64]) -> Result<f64> {
    if gammas.len() != betas.len() {
        return Err(Error::DimensionMismatch { expected: gammas.len(), got: betas.len() });
    }
    let mut state = StateVector::plus(h.n_qubits())?;
    for (&g, &b) in gammas.iter().zip(betas) {
        state.apply_cost_layer(h, g)?;
        state.apply_mixer_layer(b)?;
    }
    state.expectation_zz(h)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmStartAngles {
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    pub final_cost: f64,
    pub iterations_used: usize,
    /// Best cost found after each objective evaluation.
    pub cost_history: Vec<f64>,
}

impl WarmStartAngles {
    pub fn p(&self) -> usize {
        self.gammas.len()
    }
}

/// Counts objective evaluations against the budget and keeps the incumbent.
struct Tracker<'a> {
    h: &'a ZZHamiltonian,
    p: usize,
    max_evals: usize,
    history: Vec<f64>,
    best: (Vec<f64>, f64),
}

impl Tracker<'_> {
    fn eval(&mut self, x: &[f64]) -> Result<Option<f64>> {
        if self.history.len() >= self.max_evals {
            return Ok(None);
        }
        let f = qaoa_expectation(self.h, &x[..self.p], &x[self.p..])?;
        if f < self.best.1 {
            self.best = (x.to_vec(), f);
        }
        self.history.push(self.best.1);
        Ok(Some(f))
    }
}

/// Minimises the QAOA expectation with an adaptive Nelder–Mead simplex.
///
/// One iteration is one objective evaluation. The run stops when the budget
/// is used up or when the incumbent improves by less than `1e-6` across ten
/// consecutive simplex updates. Starting angles are seeded-uniform with
/// `γ ∈ [0, 2π)` and `β ∈ [0, π)`.
pub fn optimize_angles(h: &ZZHamiltonian, p: usize, max_iters: usize, seed: u64) -> Result<WarmStartAngles> {
    if p == 0 || max_iters == 0 {
        return Err(Error::InvalidParameter("p and max_iters must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gammas: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    let betas: Vec<f64> = (0..p).map(|_| rng.random_range(0.0..PI)).collect();
    let x0: Vec<f64> = gammas.into_iter().chain(betas).collect();

    let mut tr = Tracker { h, p, max_evals: max_iters, history: Vec::new(), best: (x0.clone(), f64::INFINITY) };
    nelder_mead(&mut tr, x0)?;

    let (x, final_cost) = tr.best;
    Ok(WarmStartAngles {
        gammas: x[..p].to_vec(),
        betas: x[p..].to_vec(),
        final_cost,
        iterations_used: tr.history.len(),
        cost_history: tr.history,
    })
}

fn nelder_mead(tr: &mut Tracker<'_>, x0: Vec<f64>) -> Result<()> {
    let dim = x0.len();
    let d = dim as f64;
    let (alpha, beta, gamma, delta) = (1.0, 1.0 + 2.0 / d, 0.75 - 0.5 / d, 1.0 - 1.0 / d);

    let Some(f0) = tr.eval(&x0)? else { return Ok(()) };
    let mut simplex = vec![(x0.clone(), f0)];
    for i in 0..dim {
        let mut x = x0.clone();
        x[i] += INITIAL_STEP;
        let Some(f) = tr.eval(&x)? else { return Ok(()) };
        simplex.push((x, f));
    }

    let mut best_per_iter = Vec::new();
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        best_per_iter.push(simplex[0].1);
        if best_per_iter.len() > PATIENCE {
            let earlier = best_per_iter[best_per_iter.len() - 1 - PATIENCE];
            if earlier - simplex[0].1 < PATIENCE_TOL {
                return Ok(());
            }
        }

        let centroid: Vec<f64> = (0..dim).map(|k| simplex[..dim].iter().map(|(x, _)| x[k]).sum::<f64>() / d).collect();
        let worst = simplex[dim].clone();
        let toward = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };

        let xr = toward(alpha);
        let Some(fr) = tr.eval(&xr)? else { return Ok(()) };
        if fr < simplex[0].1 {
            let xe = toward(alpha * beta);
            let Some(fe) = tr.eval(&xe)? else { return Ok(()) };
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let xc = toward(alpha * gamma);
            let Some(fc) = tr.eval(&xc)? else { return Ok(()) };
            (xc, fc)
        } else {
            let xc = toward(-gamma);
            let Some(fc) = tr.eval(&xc)? else { return Ok(()) };
            (xc, fc)
        };
        if fc < fr.min(worst.1) {
            simplex[dim] = (xc, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + delta * (v - b)).collect();
            let Some(f) = tr.eval(&x)? else { return Ok(()) };
            *vertex = (x, f);
        }
    }
}

/// Serialized warm-start result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WarmStartArtifact {
    pub p: usize,
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    pub final_cost: f64,
    pub cost_history: Vec<f64>,
    pub seed: u64,
    pub subgraph_indices: Vec<usize>,
}

impl WarmStartArtifact {
    pub fn new(angles: &WarmStartAngles, seed: u64, sub: &Subgraph) -> Self {
        Self {
            p: angles.p(),
            gammas: angles.gammas.clone(),
            betas: angles.betas.clone(),
            final_cost: angles.final_cost,
            cost_history: angles.cost_history.clone(),
            seed,
            subgraph_indices: sub.selected_customers.clone(),
        }
    }

    pub fn angles(&self) -> WarmStartAngles {
        WarmStartAngles {
            gammas: self.gammas.clone(),
            betas: self.betas.clone(),
            final_cost: self.final_cost,
            iterations_used: self.cost_history.len(),
            cost_history: self.cost_history.clone(),
        }
    }
}

/// Copies `(γ_l, β_l)` into layer `l` of the policy's QAOA blocks, leaving
/// every other parameter untouched.
pub fn export_warm_start(angles: &WarmStartAngles, params: &mut PolicyParams) -> Result<()> {
    let n_layers = params.qaoa_angles.len();
    if angles.p() != n_layers || angles.betas.len() != n_layers {
        return Err(Error::LayerMismatch { p: angles.p(), n_layers });
    }
    for (slot, (&g, &b)) in params.qaoa_angles.iter_mut().zip(angles.gammas.iter().zip(&angles.betas)) {
        *slot = [g, b];
    }
    Ok(())
}

/// Subgraph, its Hamiltonian and optimised angles for one instance.
pub fn warm_start(
    instance: &VrpInstance,
    n_qubits: usize,
    p: usize,
    max_iters: usize,
    seed: u64,
) -> Result<(Subgraph, ZZHamiltonian, WarmStartAngles)> {
    let sub = build_subgraph(instance, n_qubits)?;
    let h = build_cost_hamiltonian(&sub)?;
    let angles = optimize_angles(&h, p, max_iters, seed)?;
    Ok((sub, h, angles))
}
