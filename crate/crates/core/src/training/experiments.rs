//! Multi-seed experiment drivers: method comparison, ablation, transfer.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    evaluate, finetune_on, nearest_neighbor, oracle_cost, random_rollout_with, train_on, Method, RunConfig,
    TrainingLog, BRUTE_FORCE_MAX,
};
use crate::env::{generate_instance, route_cost, VrpInstance};
use crate::error::{Error, Result};
use crate::policy::HybridPolicy;
use crate::warmstart::{build_cost_hamiltonian, build_subgraph};

pub const SEEDS: [u64; 5] = [7, 77, 88, 101, 2024];
pub const SMOOTHING_WINDOW: usize = 10;

/// Source size and length of the pre-training run used before fine-tuning.
pub const PRETRAIN_CUSTOMERS: usize = 8;
pub const PRETRAIN_EPISODES: usize = 60;

pub const ABLATION_VARIANTS: [&str; 4] = ["full", "no-warm-start", "no-value-baseline", "no-finetune"];

/// `max(1, N / 4)` vehicles.
pub fn default_vehicles(n_customers: usize) -> usize {
    (n_customers / 4).max(1)
}

/// Trailing mean over up to `window` values; the first entries average
/// whatever is available.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut sum = 0.0;
    let mut out = Vec::with_capacity(values.len());
    for (i, v) in values.iter().enumerate() {
        sum += v;
        if i >= window {
            sum -= values[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// First episode whose smoothed reward reaches each threshold.
pub fn convergence_episodes(log: &TrainingLog, thresholds: &[f64]) -> Result<Vec<Option<usize>>> {
    if log.records.is_empty() {
        return Err(Error::Empty("training log"));
    }
    if thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("thresholds must be sorted ascending".into()));
    }
    let smooth = moving_average(&log.rewards(), SMOOTHING_WINDOW);
    Ok(thresholds.iter().map(|&t| smooth.iter().position(|&r| r >= t).map(|i| log.records[i].episode)).collect())
}

/// Sum of the smoothed reward curve.
pub fn area_under_curve(log: &TrainingLog) -> f64 {
    moving_average(&log.rewards(), SMOOTHING_WINDOW).iter().sum()
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// One table line. `None` cells print as `N/A`; analytic reference rows carry
/// no measured cost or memory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub n_customers: usize,
    pub normalized_cost: Option<f64>,
    pub qubits: Option<usize>,
    pub depth: Option<String>,
    pub peak_mem_bytes: Option<u64>,
    /// Per-seed normalized costs behind the median.
    pub samples: Vec<f64>,
}

impl ComparisonRow {
    fn measured(method: &str, n: usize, samples: Vec<f64>) -> Self {
        Self {
            method: method.into(),
            n_customers: n,
            normalized_cost: median(&samples),
            qubits: None,
            depth: None,
            peak_mem_bytes: None,
            samples,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

pub const COMPARISON_HEADER: &str = "method,n_customers,normalized_cost,qubits,depth,peak_mem_bytes";

impl ComparisonTable {
    pub fn get(&self, method: &str, n_customers: usize) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.method == method && r.n_customers == n_customers)
    }

    pub fn cost(&self, method: &str, n_customers: usize) -> Option<f64> {
        self.get(method, n_customers).and_then(|r| r.normalized_cost)
    }

    pub fn to_csv(&self) -> String {
        fn cell<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map_or_else(|| "N/A".to_string(), T::to_string)
        }
        let mut out = String::from(COMPARISON_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.method,
                r.n_customers,
                cell(&r.normalized_cost),
                cell(&r.qubits),
                cell(&r.depth),
                cell(&r.peak_mem_bytes)
            ));
        }
        out
    }
}

fn sized(base: &RunConfig, n: usize, seed: u64) -> RunConfig {
    RunConfig { n_customers: n, n_vehicles: default_vehicles(n), seed, ..base.clone() }
}

/// Trains `config` on its instance, after pre-training at
/// [`PRETRAIN_CUSTOMERS`] when `pretrain` is set and the target is larger.
fn train_sized(config: &RunConfig, pretrain: bool) -> Result<(TrainingLog, super::Checkpoint)> {
    let instance = config.instance()?;
    if pretrain && config.n_customers > PRETRAIN_CUSTOMERS {
        let source = RunConfig { episodes: PRETRAIN_EPISODES, ..sized(config, PRETRAIN_CUSTOMERS, config.seed) };
        let (_, ck) = train_on(&source, &source.instance()?)?;
        finetune_on(&ck, config, &instance)
    } else {
        train_on(config, &instance)
    }
}

fn normalized_eval(config: &RunConfig, pretrain: bool) -> Result<(f64, TrainingLog)> {
    let (log, ck) = train_sized(config, pretrain)?;
    let ev = evaluate(&ck, &config.instance()?)?;
    Ok((ev.normalized_cost, log))
}

/// Four configurations per size, each run on every seed with shared
/// instances: the full pipeline (pre-trained at 8 customers for larger
/// sizes), without warm start, without the value baseline, and trained from
/// scratch at each size.
pub fn ablate(base: &RunConfig, sizes: &[usize], seeds: &[u64]) -> Result<ComparisonTable> {
    base.validate()?;
    if seeds.is_empty() {
        return Err(Error::Empty("seeds"));
    }
    let base = RunConfig { method: Method::HqrlQaoa, ..base.clone() };
    let jobs: Vec<(usize, usize, u64)> = sizes
        .iter()
        .flat_map(|&n| (0..ABLATION_VARIANTS.len()).flat_map(move |v| seeds.iter().map(move |&s| (n, v, s))))
        .collect();
    let costs: Vec<f64> = jobs
        .par_iter()
        .map(|&(n, v, seed)| {
            let mut c = sized(&base, n, seed);
            c.warm_start = true;
            c.value_baseline = true;
            match ABLATION_VARIANTS[v] {
                "no-warm-start" => c.warm_start = false,
                "no-value-baseline" => c.value_baseline = false,
                _ => {}
            }
            let pretrain = ABLATION_VARIANTS[v] != "no-finetune";
            normalized_eval(&c, pretrain).map(|(cost, _)| cost)
        })
        .collect::<Result<_>>()?;
    let mut table = ComparisonTable::default();
    let per = seeds.len();
    for (i, chunk) in costs.chunks(per).enumerate() {
        let (n, v, _) = jobs[i * per];
        table.rows.push(ComparisonRow::measured(ABLATION_VARIANTS[v], n, chunk.to_vec()));
    }
    Ok(table)
}

fn random_normalized(instance: &VrpInstance, config: &RunConfig, seed: u64) -> Result<f64> {
    let (_, routes) = random_rollout_with(instance, seed, config.env_config())?;
    let (_, oracle) = oracle_cost(instance)?;
    Ok(route_cost(instance, &routes)? / oracle)
}

/// Per size: trains HQRL-QAOA and vanilla QRL from scratch on each seed and
/// tabulates greedy normalized costs with circuit resources and the memory
/// estimate, plus the random, nearest-neighbour and exact baselines. Two
/// analytic rows give the textbook resource scaling of a Grover adaptive
/// search encoding (`N·K` qubits, exponential depth) and a standalone QAOA
/// encoding (`N` qubits, depth `p·N`).
pub fn scalability_sweep(sizes: &[usize], config: &RunConfig, seeds: &[u64]) -> Result<ComparisonTable> {
    if sizes.len() < 2 {
        return Err(Error::InvalidParameter("a sweep needs at least two sizes".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Empty("seeds"));
    }
    config.validate()?;
    let learned = [Method::HqrlQaoa, Method::VanillaQrl];
    let jobs: Vec<(usize, Method, u64)> =
        sizes.iter().flat_map(|&n| learned.iter().flat_map(move |&m| seeds.iter().map(move |&s| (n, m, s)))).collect();
    let runs: Vec<(f64, TrainingLog)> = jobs
        .par_iter()
        .map(|&(n, method, seed)| normalized_eval(&RunConfig { method, ..sized(config, n, seed) }, false))
        .collect::<Result<_>>()?;

    let mut table = ComparisonTable::default();
    let per = seeds.len();
    for (i, chunk) in runs.chunks(per).enumerate() {
        let (n, method, seed) = jobs[i * per];
        let c = RunConfig { method, ..sized(config, n, seed) };
        let h = build_cost_hamiltonian(&build_subgraph(&c.instance()?, c.n_qubits)?)?;
        let metrics = HybridPolicy::new(c.shape(), &h)?.metrics();
        let mut row = ComparisonRow::measured(method.tag(), n, chunk.iter().map(|r| r.0).collect());
        row.qubits = Some(metrics.qubit_count);
        row.depth = Some(metrics.depth.to_string());
        row.peak_mem_bytes = chunk.iter().map(|r| r.1.peak_memory_bytes).max();
        table.rows.push(row);
    }

    for &n in sizes {
        let k = default_vehicles(n);
        let mut random = Vec::new();
        let mut nn = Vec::new();
        for &seed in seeds {
            let c = sized(config, n, seed);
            let inst = generate_instance(n, k, seed)?;
            let (_, oracle) = oracle_cost(&inst)?;
            random.push(random_normalized(&inst, &c, seed)?);
            nn.push(nearest_neighbor(&inst)?.1 / oracle);
        }
        table.rows.push(ComparisonRow::measured(Method::Random.tag(), n, random));
        table.rows.push(ComparisonRow::measured(Method::NearestNeighbor.tag(), n, nn));
        let exact = if n <= BRUTE_FORCE_MAX { vec![1.0; seeds.len()] } else { Vec::new() };
        table.rows.push(ComparisonRow::measured(Method::BruteForce.tag(), n, exact));
        table.rows.push(ComparisonRow {
            method: "gas-analytic".into(),
            n_customers: n,
            normalized_cost: None,
            qubits: Some(n * k),
            depth: Some("exp".into()),
            peak_mem_bytes: None,
            samples: Vec::new(),
        });
        table.rows.push(ComparisonRow {
            method: "qaoa-analytic".into(),
            n_customers: n,
            normalized_cost: None,
            qubits: Some(n),
            depth: Some((config.p * n).to_string()),
            peak_mem_bytes: None,
            samples: Vec::new(),
        });
    }
    Ok(table)
}

/// Paired comparison of a transferred agent and a from-scratch agent on the
/// same target instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferOutcome {
    pub seed: u64,
    pub finetuned: TrainingLog,
    pub scratch: TrainingLog,
}

impl TransferOutcome {
    /// Greedy rewards before any update on the target.
    pub fn initial_rewards(&self) -> (f64, f64) {
        (self.finetuned.initial_eval_reward, self.scratch.initial_eval_reward)
    }

    /// Mean training reward over target episodes `from..to`.
    pub fn window_means(&self, from: usize, to: usize) -> Option<(f64, f64)> {
        Some((self.finetuned.mean_reward(from, to)?, self.scratch.mean_reward(from, to)?))
    }
}

/// Pre-trains `source` for `source.episodes`, then fine-tunes on `target`
/// for `target.episodes`; the control trains the same target config from
/// scratch. Both target runs share each seed's instance.
pub fn transfer_study(source: &RunConfig, target: &RunConfig, seeds: &[u64]) -> Result<Vec<TransferOutcome>> {
    source.validate()?;
    target.validate()?;
    seeds
        .par_iter()
        .map(|&seed| {
            let src = RunConfig { seed, ..source.clone() };
            let tgt = RunConfig { seed, ..target.clone() };
            let instance = tgt.instance()?;
            let (_, ck) = train_on(&src, &src.instance()?)?;
            let (finetuned, _) = finetune_on(&ck, &tgt, &instance)?;
            let (scratch, _) = train_on(&tgt, &instance)?;
            Ok(TransferOutcome { seed, finetuned, scratch })
        })
        .collect()
}
