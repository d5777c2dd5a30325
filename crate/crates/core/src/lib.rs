//! Hybrid quantum reinforcement learning for vehicle routing.
//!
//! A small policy circuit whose entangling blocks are QAOA cost and mixer
//! layers is trained with REINFORCE and a classical value baseline. The
//! cost-layer angles can be warm-started by optimising a QAOA objective on
//! the customers nearest the depot.
//!
//! Modules, bottom-up:
//! - [`sim`]: dense statevector simulator and parameter-shift gradients
//! - [`env`]: seeded VRP instances and the routing MDP
//! - [`warmstart`]: subgraph Hamiltonian and QAOA angle optimisation
//! - [`policy`]: hybrid policy, value network, gradients and optimizer
//! - [`training`]: training loop, baselines, evaluation and experiments

pub mod env;
pub mod error;
pub mod policy;
pub mod sim;
pub mod training;
pub mod warmstart;

pub use env::{VrpEnv, VrpInstance};
pub use error::{Error, Result};
pub use policy::{PolicyParams, ValueParams};
pub use sim::{StateVector, ZZHamiltonian};
pub use training::{RunConfig, TrainingLog};
