//! Training loop, fine-tuning, evaluation and checkpoints.

mod baselines;
mod experiments;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    generate_instance, route_cost, EnvConfig, Trajectory, VehicleRule, VrpEnv, VrpInstance, DEFAULT_GAMMA,
    DEFAULT_LAMBDA,
};
use crate::error::{Error, Result};
use crate::policy::{
    apply_update, reinforce_gradients, Affine, HybridPolicy, InitScales, LearningRates, OptimizerState, PolicyParams,
    PolicyShape, ValueParams, N_LAYERS, N_QUBITS, VALUE_HIDDEN,
};
use crate::sim::{ZZHamiltonian, MAX_QUBITS};
use crate::warmstart::{
    build_cost_hamiltonian, build_subgraph, export_warm_start, optimize_angles, WarmStartArtifact, DEFAULT_MAX_ITERS,
};

pub use baselines::{
    brute_force_optimal, nearest_neighbor, random_policy_rollout, random_rollout_with, BRUTE_FORCE_MAX,
};
pub use experiments::{
    ablate, area_under_curve, convergence_episodes, default_vehicles, median, moving_average, scalability_sweep,
    transfer_study, ComparisonRow, ComparisonTable, TransferOutcome, ABLATION_VARIANTS, COMPARISON_HEADER,
    PRETRAIN_CUSTOMERS, PRETRAIN_EPISODES, SEEDS, SMOOTHING_WINDOW,
};

const INIT_STREAM: u64 = 0;
const ROLLOUT_STREAM: u64 = 1;
const FINETUNE_STREAM: u64 = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    HqrlQaoa,
    VanillaQrl,
    Random,
    NearestNeighbor,
    BruteForce,
}

impl Method {
    pub const ALL: [Method; 5] =
        [Method::HqrlQaoa, Method::VanillaQrl, Method::Random, Method::NearestNeighbor, Method::BruteForce];

    pub fn tag(self) -> &'static str {
        match self {
            Method::HqrlQaoa => "hqrl-qaoa",
            Method::VanillaQrl => "vanilla-qrl",
            Method::Random => "random",
            Method::NearestNeighbor => "nearest-neighbor",
            Method::BruteForce => "brute-force",
        }
    }

    pub fn is_learned(self) -> bool {
        matches!(self, Method::HqrlQaoa | Method::VanillaQrl)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.tag() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown method tag {s:?}")))
    }
}

/// One training or evaluation run. Missing JSON fields take the defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_customers: usize,
    pub n_vehicles: usize,
    pub episodes: usize,
    pub seed: u64,
    pub gamma: f64,
    pub lambda_penalty: f64,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub p: usize,
    pub warm_start: bool,
    pub value_baseline: bool,
    pub method: Method,
    pub vehicle_rule: VehicleRule,
    pub qaoa_max_iters: usize,
    pub learning_rates: LearningRates,
    pub init_scales: InitScales,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_customers: 8,
            n_vehicles: 2,
            episodes: 250,
            seed: 7,
            gamma: DEFAULT_GAMMA,
            lambda_penalty: DEFAULT_LAMBDA,
            n_qubits: N_QUBITS,
            n_layers: N_LAYERS,
            p: N_LAYERS,
            warm_start: true,
            value_baseline: true,
            method: Method::HqrlQaoa,
            vehicle_rule: VehicleRule::Nearest,
            qaoa_max_iters: DEFAULT_MAX_ITERS,
            learning_rates: LearningRates::default(),
            init_scales: InitScales::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_customers == 0 || self.n_vehicles == 0 || self.n_vehicles > self.n_customers {
            return bad(format!(
                "need 1 <= n_vehicles <= n_customers (got {} and {})",
                self.n_vehicles, self.n_customers
            ));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma {} outside (0, 1]", self.gamma));
        }
        if !(self.lambda_penalty.is_finite() && self.lambda_penalty >= 0.0) {
            return bad(format!("lambda_penalty {} must be finite and non-negative", self.lambda_penalty));
        }
        if !(2..=MAX_QUBITS).contains(&self.n_qubits) {
            return bad(format!("n_qubits {} outside 2..={MAX_QUBITS}", self.n_qubits));
        }
        if self.n_layers == 0 || self.p == 0 {
            return bad("n_layers and p must be positive".into());
        }
        if self.p != self.n_layers {
            return Err(Error::LayerMismatch { p: self.p, n_layers: self.n_layers });
        }
        if self.qaoa_max_iters == 0 {
            return bad("qaoa_max_iters must be positive".into());
        }
        let lr = self.learning_rates;
        let s = self.init_scales;
        if [lr.quantum, lr.classical, s.encoder_std, s.head_std].iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("learning rates and init scales must be finite and non-negative".into());
        }
        Ok(())
    }

    pub fn shape(&self) -> PolicyShape {
        PolicyShape {
            n_customers: self.n_customers,
            n_vehicles: self.n_vehicles,
            n_qubits: self.n_qubits,
            n_layers: self.n_layers,
        }
    }

    pub fn env_config(&self) -> EnvConfig {
        EnvConfig { lambda: self.lambda_penalty, vehicle_rule: self.vehicle_rule }
    }

    /// Vanilla QRL never warm-starts.
    pub fn uses_warm_start(&self) -> bool {
        self.warm_start && self.method == Method::HqrlQaoa
    }

    pub fn instance(&self) -> Result<VrpInstance> {
        generate_instance(self.n_customers, self.n_vehicles, self.seed)
    }

    fn check_trainable(&self) -> Result<()> {
        self.validate()?;
        if !self.method.is_learned() {
            return Err(Error::InvalidParameter(format!("method {} is not trained", self.method)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub total_reward: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub route_cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub config: RunConfig,
    pub records: Vec<EpisodeRecord>,
    pub wall_time_secs: f64,
    pub peak_memory_bytes: u64,
    /// Greedy rollout reward before the first update.
    pub initial_eval_reward: f64,
    pub warm_start: Option<WarmStartArtifact>,
}

pub const METRICS_HEADER: &str = "episode,total_reward,policy_loss,value_loss,route_cost";

impl TrainingLog {
    pub fn rewards(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.total_reward).collect()
    }

    /// Mean reward over episodes `from..to` (clamped to the log).
    pub fn mean_reward(&self, from: usize, to: usize) -> Option<f64> {
        let to = to.min(self.records.len());
        if from >= to {
            return None;
        }
        Some(self.records[from..to].iter().map(|r| r.total_reward).sum::<f64>() / (to - from) as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(METRICS_HEADER);
        out.push('\n');
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.episode, r.total_reward, r.policy_loss, r.value_loss, r.route_cost
            ));
        }
        out
    }
}

/// Serialized agent. `hamiltonian` is the policy circuit's cost operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub hamiltonian: ZZHamiltonian,
    pub encoder_weights: Affine,
    pub rotation_angles: Vec<Vec<[f64; 2]>>,
    pub qaoa_angles: Vec<[f64; 2]>,
    pub head_weights: Affine,
    pub value_params: ValueParams,
    pub optimizer_state: OptimizerState,
    pub episode_count: usize,
}

impl Checkpoint {
    fn new(agent: &Agent, config: &RunConfig, episode_count: usize) -> Self {
        Self {
            config: config.clone(),
            hamiltonian: agent.hamiltonian.clone(),
            encoder_weights: agent.params.encoder_weights.clone(),
            rotation_angles: agent.params.rotation_angles.clone(),
            qaoa_angles: agent.params.qaoa_angles.clone(),
            head_weights: agent.params.head_weights.clone(),
            value_params: agent.value.clone(),
            optimizer_state: agent.opt.clone(),
            episode_count,
        }
    }

    pub fn policy_params(&self) -> Result<PolicyParams> {
        let params = PolicyParams {
            shape: self.config.shape(),
            encoder_weights: self.encoder_weights.clone(),
            rotation_angles: self.rotation_angles.clone(),
            qaoa_angles: self.qaoa_angles.clone(),
            head_weights: self.head_weights.clone(),
        };
        params.validate().map_err(|e| Error::IncompatibleCheckpoint(e.to_string()))?;
        Ok(params)
    }

    pub fn policy(&self) -> Result<HybridPolicy> {
        HybridPolicy::new(self.config.shape(), &self.hamiltonian)
    }

    /// Checks internal consistency of all stored arrays.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let params = self.policy_params()?;
        let incompatible = |m: String| Err(Error::IncompatibleCheckpoint(m));
        if self.hamiltonian.n_qubits() > self.config.n_qubits {
            return incompatible("hamiltonian wider than the register".into());
        }
        self.value_params.validate().map_err(|e| Error::IncompatibleCheckpoint(e.to_string()))?;
        if self.value_params.state_dim() != self.config.shape().state_dim() {
            return incompatible("value network input does not match the state size".into());
        }
        let opt = &self.optimizer_state;
        if opt.policy.m.len() != params.len()
            || opt.policy.v.len() != params.len()
            || opt.value.m.len() != self.value_params.len()
            || opt.value.v.len() != self.value_params.len()
        {
            return incompatible("optimizer moments do not match the parameters".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(s)?;
        ck.validate()?;
        Ok(ck)
    }
}

/// Greedy rollout result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub routes: Vec<Vec<usize>>,
    pub cost: f64,
    pub normalized_cost: f64,
    pub oracle: Method,
    pub oracle_cost: f64,
    pub total_reward: f64,
}

/// Reference cost: exact for `N ≤ 9`, nearest neighbour otherwise.
pub fn oracle_cost(instance: &VrpInstance) -> Result<(Method, f64)> {
    if instance.n_customers() <= BRUTE_FORCE_MAX {
        Ok((Method::BruteForce, brute_force_optimal(instance)?.1))
    } else {
        Ok((Method::NearestNeighbor, nearest_neighbor(instance)?.1))
    }
}

pub fn normalize(instance: &VrpInstance, routes: &[Vec<usize>]) -> Result<f64> {
    let cost = route_cost(instance, routes)?;
    let (_, oracle) = oracle_cost(instance)?;
    Ok(if oracle > 0.0 { cost / oracle } else { 1.0 })
}

struct Agent {
    env: VrpEnv,
    hamiltonian: ZZHamiltonian,
    policy: HybridPolicy,
    params: PolicyParams,
    value: ValueParams,
    opt: OptimizerState,
}

impl Agent {
    fn rollout(&self, mut rng: Option<&mut ChaCha8Rng>, gamma: f64) -> Result<(Trajectory, Vec<Vec<usize>>)> {
        let mut state = self.env.reset();
        let (mut states, mut masks, mut actions, mut rewards) = (vec![], vec![], vec![], vec![]);
        while !state.done {
            let s = self.env.encode_state(&state)?;
            let mask = self.env.valid_action_mask(&state)?;
            let dist = self.policy.forward(&s, &self.params, &mask)?;
            let a = match rng.as_deref_mut() {
                Some(r) => dist.sample(r),
                None => dist.greedy(),
            };
            let out = self.env.step(&state, a)?;
            states.push(s);
            masks.push(mask);
            actions.push(a);
            rewards.push(out.reward);
            state = out.next_state;
        }
        let traj = Trajectory::new(states, masks, actions, rewards, gamma)?;
        Ok((traj, state.routes))
    }

    fn greedy_reward(&self) -> Result<f64> {
        Ok(self.rollout(None, DEFAULT_GAMMA)?.0.total_reward())
    }

    fn run(&mut self, config: &RunConfig, rng: &mut ChaCha8Rng, first_episode: usize) -> Result<Vec<EpisodeRecord>> {
        let instance = self.env.instance().clone();
        let mut records = Vec::with_capacity(config.episodes);
        for e in 0..config.episodes {
            let episode = first_episode + e;
            let (traj, routes) = self.rollout(Some(rng), config.gamma)?;
            let grads = reinforce_gradients(&traj, &self.policy, &self.params, &self.value, config.value_baseline)
                .map_err(|err| match err {
                    Error::NonFinite(what) => Error::NonFinite(format!("{what} at episode {episode}")),
                    other => other,
                })?;
            apply_update(&mut self.params, &mut self.value, &grads, &mut self.opt, config.learning_rates)?;
            records.push(EpisodeRecord {
                episode,
                total_reward: traj.total_reward(),
                policy_loss: grads.policy_loss,
                value_loss: grads.value_loss,
                route_cost: route_cost(&instance, &routes)?,
            });
        }
        Ok(records)
    }
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn check_instance(config: &RunConfig, instance: &VrpInstance) -> Result<()> {
    if instance.n_customers() != config.n_customers || instance.n_vehicles() != config.n_vehicles {
        return Err(Error::InvalidParameter(format!(
            "config is for N = {}, K = {} but the instance has N = {}, K = {}",
            config.n_customers,
            config.n_vehicles,
            instance.n_customers(),
            instance.n_vehicles()
        )));
    }
    Ok(())
}

fn policy_hamiltonian(instance: &VrpInstance, config: &RunConfig) -> Result<ZZHamiltonian> {
    build_cost_hamiltonian(&build_subgraph(instance, config.n_qubits)?)
}

/// Trains on `generate_instance(N, K, seed)`.
pub fn train(config: &RunConfig) -> Result<(TrainingLog, Checkpoint)> {
    config.check_trainable()?;
    train_on(config, &config.instance()?)
}

/// Trains from a fresh seeded initialisation. With warm start the QAOA
/// angles are optimised on the instance's subgraph before episode 0.
pub fn train_on(config: &RunConfig, instance: &VrpInstance) -> Result<(TrainingLog, Checkpoint)> {
    config.check_trainable()?;
    check_instance(config, instance)?;
    let start = Instant::now();
    let sub = build_subgraph(instance, config.n_qubits)?;
    let hamiltonian = build_cost_hamiltonian(&sub)?;
    let shape = config.shape();
    let mut init = stream(config.seed, INIT_STREAM);
    let mut params = PolicyParams::random(shape, config.init_scales, &mut init);
    let value = ValueParams::random(shape.state_dim(), &mut init);
    let warm = if config.uses_warm_start() {
        let angles = optimize_angles(&hamiltonian, config.p, config.qaoa_max_iters, config.seed)?;
        export_warm_start(&angles, &mut params)?;
        Some(WarmStartArtifact::new(&angles, config.seed, &sub))
    } else {
        None
    };
    let opt = OptimizerState::new(&params, &value);
    let policy = HybridPolicy::new(shape, &hamiltonian)?;
    let env = VrpEnv::new(instance.clone(), config.env_config());
    let mut agent = Agent { env, hamiltonian, policy, params, value, opt };
    run_agent(&mut agent, config, stream(config.seed, ROLLOUT_STREAM), 0, warm, start)
}

fn run_agent(
    agent: &mut Agent,
    config: &RunConfig,
    mut rng: ChaCha8Rng,
    first_episode: usize,
    warm_start: Option<WarmStartArtifact>,
    start: Instant,
) -> Result<(TrainingLog, Checkpoint)> {
    let initial_eval_reward = agent.greedy_reward()?;
    let records = agent.run(config, &mut rng, first_episode)?;
    let checkpoint = Checkpoint::new(agent, config, first_episode + records.len());
    let log = TrainingLog {
        config: config.clone(),
        records,
        wall_time_secs: start.elapsed().as_secs_f64(),
        peak_memory_bytes: memory_estimate(&config.shape(), agent.hamiltonian.terms().len()),
        initial_eval_reward,
        warm_start,
    };
    Ok((log, checkpoint))
}

/// Continues training on `generate_instance(N, K, seed)` of `new_config`.
pub fn finetune(checkpoint: &Checkpoint, new_config: &RunConfig) -> Result<(TrainingLog, Checkpoint)> {
    new_config.check_trainable()?;
    finetune_on(checkpoint, new_config, &new_config.instance()?)
}

/// Transfers a trained agent to `instance`.
///
/// Circuit angles are kept. On a size change the encoder and the value
/// network's first layer keep their weights for the vehicle, coordinate and
/// mask entries that exist in both sizes (new inputs start at zero), the
/// head keeps the rows of shared cities and draws fresh rows for new ones,
/// and both optimizers restart. At the same size this is plain continued
/// training. The cost layers use the new instance's subgraph.
pub fn finetune_on(
    checkpoint: &Checkpoint,
    new_config: &RunConfig,
    instance: &VrpInstance,
) -> Result<(TrainingLog, Checkpoint)> {
    new_config.check_trainable()?;
    check_instance(new_config, instance)?;
    checkpoint.validate()?;
    let old = &checkpoint.config;
    if old.n_qubits != new_config.n_qubits || old.n_layers != new_config.n_layers {
        return Err(Error::IncompatibleCheckpoint(format!(
            "checkpoint has {} qubits and {} layers, config asks for {} and {}",
            old.n_qubits, old.n_layers, new_config.n_qubits, new_config.n_layers
        )));
    }
    let start = Instant::now();
    let old_params = checkpoint.policy_params()?;
    let shape = new_config.shape();
    let hamiltonian = policy_hamiltonian(instance, new_config)?;
    let (params, value, opt) = if shape == old_params.shape {
        (old_params, checkpoint.value_params.clone(), checkpoint.optimizer_state.clone())
    } else {
        let mut init = stream(new_config.seed, FINETUNE_STREAM);
        let fresh = PolicyParams::random(shape, new_config.init_scales, &mut init);
        let params = PolicyParams {
            shape,
            encoder_weights: remap_inputs(&old_params.encoder_weights, old_params.shape, shape),
            rotation_angles: old_params.rotation_angles.clone(),
            qaoa_angles: old_params.qaoa_angles.clone(),
            head_weights: remap_head(&old_params.head_weights, &fresh.head_weights),
        };
        let value = ValueParams {
            hidden: remap_inputs(&checkpoint.value_params.hidden, old_params.shape, shape),
            output: checkpoint.value_params.output.clone(),
        };
        let opt = OptimizerState::new(&params, &value);
        (params, value, opt)
    };
    let policy = HybridPolicy::new(shape, &hamiltonian)?;
    let env = VrpEnv::new(instance.clone(), new_config.env_config());
    let mut agent = Agent { env, hamiltonian, policy, params, value, opt };
    let rng = stream(new_config.seed, ROLLOUT_STREAM);
    run_agent(&mut agent, new_config, rng, checkpoint.episode_count, None, start)
}

/// Column map between state layouts `[vehicles 2K | coordinates 2N | mask N]`.
fn remap_inputs(layer: &Affine, from: PolicyShape, to: PolicyShape) -> Affine {
    let blocks = |s: PolicyShape| [2 * s.n_vehicles, 2 * s.n_customers, s.n_customers];
    let (bf, bt) = (blocks(from), blocks(to));
    let weights = layer
        .weights
        .iter()
        .map(|row| {
            let mut out = Vec::with_capacity(to.state_dim());
            let mut offset = 0;
            for (&lf, &lt) in bf.iter().zip(&bt) {
                let keep = lf.min(lt);
                out.extend(&row[offset..offset + keep]);
                out.extend(std::iter::repeat_n(0.0, lt - keep));
                offset += lf;
            }
            out
        })
        .collect();
    Affine { weights, bias: layer.bias.clone() }
}

fn remap_head(old: &Affine, fresh: &Affine) -> Affine {
    let mut head = fresh.clone();
    for (i, (row, b)) in old.weights.iter().zip(&old.bias).enumerate().take(head.outputs()) {
        head.weights[i].clone_from(row);
        head.bias[i] = *b;
    }
    head
}

/// Greedy rollout of `checkpoint` on `instance`, scored against the oracle.
pub fn evaluate(checkpoint: &Checkpoint, instance: &VrpInstance) -> Result<Evaluation> {
    checkpoint.validate()?;
    check_instance(&checkpoint.config, instance).map_err(|e| Error::IncompatibleCheckpoint(e.to_string()))?;
    let agent = Agent {
        env: VrpEnv::new(instance.clone(), checkpoint.config.env_config()),
        hamiltonian: checkpoint.hamiltonian.clone(),
        policy: checkpoint.policy()?,
        params: checkpoint.policy_params()?,
        value: checkpoint.value_params.clone(),
        opt: checkpoint.optimizer_state.clone(),
    };
    let (traj, routes) = agent.rollout(None, DEFAULT_GAMMA)?;
    let cost = route_cost(instance, &routes)?;
    let (oracle, oracle_cost) = oracle_cost(instance)?;
    let normalized_cost = if oracle_cost > 0.0 { cost / oracle_cost } else { 1.0 };
    Ok(Evaluation { routes, cost, normalized_cost, oracle, oracle_cost, total_reward: traj.total_reward() })
}

/// Bytes held at the widest point of one update: three statevectors during
/// parameter shift, the Jacobian, parameters with gradients and both Adam
/// moments, value-network activations, and one episode of stored states.
pub fn memory_estimate(shape: &PolicyShape, n_terms: usize) -> u64 {
    let f = std::mem::size_of::<f64>() as u64;
    let amp = 2 * f;
    let q = shape.n_qubits as u64;
    let d = shape.state_dim() as u64;
    let n = shape.n_customers as u64;
    let statevectors = 3 * (1u64 << q) * amp;
    let circuit_params = q + 2 * shape.n_layers as u64 * (q + 1);
    let gates = q + shape.n_layers as u64 * (3 * q + n_terms as u64);
    let circuit = gates * 6 * f;
    let jacobian = q * circuit_params * f;
    let policy_len = q * (d + 1) + 2 * shape.n_layers as u64 * (q + 1) + n * (q + 1);
    let hidden = VALUE_HIDDEN as u64;
    let value_len = hidden * (d + 1) + hidden + 1;
    let optimizer = 4 * (policy_len + value_len) * f;
    let trajectory = n * (d * f + n + 3 * f);
    statevectors + circuit + jacobian + optimizer + hidden * f + trajectory
}
