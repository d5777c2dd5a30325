//! Vehicle routing as a finite-horizon MDP.
//!
//! Customers are addressed by their 0-based position in
//! [`VrpInstance::customers`]; this is also the action index. The depot is
//! stored separately.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

pub const DEFAULT_LAMBDA: f64 = 10.0;
pub const DEFAULT_GAMMA: f64 = 0.99;
const NORMALIZE_EPS: f64 = 1e-8;

pub fn distance(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct VrpInstance {
    n_customers: usize,
    n_vehicles: usize,
    seed: u64,
    depot: Point,
    customers: Vec<Point>,
}

#[derive(Deserialize)]
struct RawInstance {
    n_customers: usize,
    n_vehicles: usize,
    seed: u64,
    depot: Point,
    customers: Vec<Point>,
}

impl TryFrom<RawInstance> for VrpInstance {
    type Error = Error;

    fn try_from(raw: RawInstance) -> Result<Self> {
        if raw.customers.len() != raw.n_customers {
            return Err(Error::InvalidInstance(format!(
                "n_customers = {} but {} coordinates given",
                raw.n_customers,
                raw.customers.len()
            )));
        }
        Self::new(raw.depot, raw.customers, raw.n_vehicles, raw.seed)
    }
}

impl VrpInstance {
    pub fn new(depot: Point, customers: Vec<Point>, n_vehicles: usize, seed: u64) -> Result<Self> {
        check_sizes(customers.len(), n_vehicles)?;
        let in_unit = |p: &Point| p.iter().all(|c| (0.0..=1.0).contains(c));
        if !in_unit(&depot) || !customers.iter().all(in_unit) {
            return Err(Error::InvalidInstance("coordinates must lie in [0, 1]^2".into()));
        }
        Ok(Self { n_customers: customers.len(), n_vehicles, seed, depot, customers })
    }

    /// Uniform coordinates on the unit square: the depot is drawn first,
    /// then customers in order.
    pub fn generate(n_customers: usize, n_vehicles: usize, seed: u64) -> Result<Self> {
        check_sizes(n_customers, n_vehicles)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> Point { [rng.random(), rng.random()] };
        let depot = draw();
        let customers = (0..n_customers).map(|_| draw()).collect();
        Ok(Self { n_customers, n_vehicles, seed, depot, customers })
    }

    pub fn n_customers(&self) -> usize {
        self.n_customers
    }

    pub fn n_vehicles(&self) -> usize {
        self.n_vehicles
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn depot(&self) -> Point {
        self.depot
    }

    pub fn customers(&self) -> &[Point] {
        &self.customers
    }

    /// Length of the flat observation, `2K + 2N + N`.
    pub fn state_dim(&self) -> usize {
        2 * self.n_vehicles + 3 * self.n_customers
    }
}

fn check_sizes(n: usize, k: usize) -> Result<()> {
    if n == 0 || k == 0 || k > n {
        return Err(Error::InvalidInstance(format!("need N >= 1, K >= 1 and K <= N (got N = {n}, K = {k})")));
    }
    Ok(())
}

pub fn generate_instance(n_customers: usize, n_vehicles: usize, seed: u64) -> Result<VrpInstance> {
    VrpInstance::generate(n_customers, n_vehicles, seed)
}

/// Rule mapping a chosen city to the vehicle that serves it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VehicleRule {
    /// Vehicle currently closest to the city; lowest index on ties.
    #[default]
    Nearest,
    /// Vehicle `t mod K` at step `t`.
    RoundRobin,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvConfig {
    pub lambda: f64,
    pub vehicle_rule: VehicleRule,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self { lambda: DEFAULT_LAMBDA, vehicle_rule: VehicleRule::Nearest }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub vehicle_positions: Vec<Point>,
    pub visited: Vec<bool>,
    pub step: usize,
    pub done: bool,
    /// Cities served by each vehicle, in visiting order.
    pub routes: Vec<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    pub done: bool,
    pub vehicle: usize,
    pub valid: bool,
}

#[derive(Clone, Debug)]
pub struct VrpEnv {
    instance: VrpInstance,
    config: EnvConfig,
}

impl VrpEnv {
    pub fn new(instance: VrpInstance, config: EnvConfig) -> Self {
        Self { instance, config }
    }

    pub fn instance(&self) -> &VrpInstance {
        &self.instance
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn reset(&self) -> EnvState {
        let k = self.instance.n_vehicles;
        EnvState {
            vehicle_positions: vec![self.instance.depot; k],
            visited: vec![false; self.instance.n_customers],
            step: 0,
            done: false,
            routes: vec![Vec::new(); k],
        }
    }

    /// `[vehicle xy … | customer xy … | mask …]`
    pub fn encode_state(&self, state: &EnvState) -> Result<Vec<f64>> {
        self.check_state(state)?;
        let mut out = Vec::with_capacity(self.instance.state_dim());
        out.extend(state.vehicle_positions.iter().flatten());
        out.extend(self.instance.customers.iter().flatten());
        out.extend(state.visited.iter().map(|&v| if v { 1.0 } else { 0.0 }));
        Ok(out)
    }

    pub fn valid_action_mask(&self, state: &EnvState) -> Result<Vec<bool>> {
        self.check_state(state)?;
        if state.done {
            return Err(Error::EpisodeDone);
        }
        Ok(state.visited.iter().map(|v| !v).collect())
    }

    pub fn select_vehicle(&self, state: &EnvState, city: usize) -> Result<usize> {
        self.check_action(city)?;
        if state.visited[city] {
            return Err(Error::AlreadyVisited(city));
        }
        Ok(self.assign(state, city))
    }

    fn assign(&self, state: &EnvState, city: usize) -> usize {
        match self.config.vehicle_rule {
            VehicleRule::RoundRobin => state.step % self.instance.n_vehicles,
            VehicleRule::Nearest => {
                let target = self.instance.customers[city];
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (k, &p) in state.vehicle_positions.iter().enumerate() {
                    let d = distance(p, target);
                    if d < best_d {
                        best = k;
                        best_d = d;
                    }
                }
                best
            }
        }
    }

    /// Transition. Revisiting a served city costs `λ` on top of the distance
    /// term and leaves everything but the step counter unchanged. When the
    /// last customer is served, every vehicle's distance back to the depot is
    /// charged on the same step.
    pub fn step(&self, state: &EnvState, action: usize) -> Result<StepOutcome> {
        self.check_state(state)?;
        self.check_action(action)?;
        if state.done {
            return Err(Error::EpisodeDone);
        }
        let vehicle = self.assign(state, action);
        let target = self.instance.customers[action];
        let travel = distance(state.vehicle_positions[vehicle], target);
        let mut next = state.clone();
        next.step += 1;

        if state.visited[action] {
            return Ok(StepOutcome {
                next_state: next,
                reward: -travel - self.config.lambda,
                done: false,
                vehicle,
                valid: false,
            });
        }

        next.vehicle_positions[vehicle] = target;
        next.visited[action] = true;
        next.routes[vehicle].push(action);
        let mut reward = -travel;
        if next.visited.iter().all(|&v| v) {
            next.done = true;
            reward -= next.vehicle_positions.iter().map(|&p| distance(p, self.instance.depot)).sum::<f64>();
        }
        Ok(StepOutcome { done: next.done, next_state: next, reward, vehicle, valid: true })
    }

    fn check_state(&self, state: &EnvState) -> Result<()> {
        if state.visited.len() != self.instance.n_customers {
            return Err(Error::DimensionMismatch { expected: self.instance.n_customers, got: state.visited.len() });
        }
        if state.vehicle_positions.len() != self.instance.n_vehicles {
            return Err(Error::DimensionMismatch {
                expected: self.instance.n_vehicles,
                got: state.vehicle_positions.len(),
            });
        }
        Ok(())
    }

    fn check_action(&self, action: usize) -> Result<()> {
        if action >= self.instance.n_customers {
            return Err(Error::ActionOutOfRange { action, n_customers: self.instance.n_customers });
        }
        Ok(())
    }
}

/// Backward recursion `G_t = R_t + γ G_{t+1}` plus per-trajectory
/// standardisation. A trajectory whose returns have spread below `1e-8`
/// normalizes to all zeros.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if rewards.is_empty() {
        return Err(Error::Empty("rewards"));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidParameter(format!("gamma {gamma} outside (0, 1]")));
    }
    let mut returns = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (g, r) in returns.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *g = acc;
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let std = (returns.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / n).sqrt();
    let normalized = if std < NORMALIZE_EPS {
        vec![0.0; returns.len()]
    } else {
        returns.iter().map(|g| (g - mean) / (std + NORMALIZE_EPS)).collect()
    };
    Ok((returns, normalized))
}

/// One rollout, stored as parallel per-step lists.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub masks: Vec<Vec<bool>>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub returns: Vec<f64>,
    pub normalized_returns: Vec<f64>,
}

impl Trajectory {
    pub fn new(
        states: Vec<Vec<f64>>,
        masks: Vec<Vec<bool>>,
        actions: Vec<usize>,
        rewards: Vec<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let t = rewards.len();
        if states.len() != t || masks.len() != t || actions.len() != t {
            return Err(Error::InvalidParameter("trajectory lists differ in length".into()));
        }
        let (returns, normalized_returns) = discounted_returns(&rewards, gamma)?;
        Ok(Self { states, masks, actions, rewards, returns, normalized_returns })
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Sum over vehicles of depot → cities → depot tour lengths.
pub fn route_cost(instance: &VrpInstance, routes: &[Vec<usize>]) -> Result<f64> {
    let n = instance.n_customers;
    let mut seen = vec![false; n];
    for &c in routes.iter().flatten() {
        if c >= n {
            return Err(Error::InvalidRoutes(format!("city {c} out of range")));
        }
        if std::mem::replace(&mut seen[c], true) {
            return Err(Error::InvalidRoutes(format!("city {c} appears more than once")));
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidRoutes(format!("city {missing} is not served")));
    }
    let mut legs: Vec<f64> = routes.iter().flat_map(|r| route_legs(instance, r)).collect();
    legs.sort_by(f64::total_cmp);
    Ok(legs.iter().sum())
}

/// Leg lengths of one depot-to-depot tour. Summing sorted legs makes the
/// total independent of vehicle order and travel direction.
fn route_legs<'a>(instance: &'a VrpInstance, route: &'a [usize]) -> impl Iterator<Item = f64> + 'a {
    let depot = instance.depot;
    let stops = route.iter().map(|&c| instance.customers[c]);
    let from = std::iter::once(depot).chain(stops.clone());
    let to = stops.chain(std::iter::once(depot));
    from.zip(to).filter(|_| !route.is_empty()).map(|(a, b)| distance(a, b))
}

/// Route file contents: vehicle id → ordered city indices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RouteSolution {
    pub routes: BTreeMap<usize, Vec<usize>>,
    pub total_cost: f64,
}

impl RouteSolution {
    pub fn new(instance: &VrpInstance, routes: &[Vec<usize>]) -> Result<Self> {
        let total_cost = route_cost(instance, routes)?;
        Ok(Self { routes: routes.iter().cloned().enumerate().collect(), total_cost })
    }

    pub fn as_routes(&self) -> Vec<Vec<usize>> {
        self.routes.values().cloned().collect()
    }
}
