//! `hqrl` command-line front end.
//!
//! Every subcommand accepts `--config`, `--seed` and `--out`. Run settings
//! resolve as: command-line flags, then the JSON config file, then the
//! `HQRL_SEED` environment variable (seed only), then [`RunConfig`] defaults.
//!
//! Exit status is [`EXIT_OK`], [`EXIT_USAGE`] for bad arguments or config
//! files, or [`EXIT_RUNTIME`] when the requested operation fails. Failures
//! print one JSON line to stderr: `{"error":"usage"|"runtime","message":...}`.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hqrl_core::env::{generate_instance, RouteSolution};
use hqrl_core::training::{
    ablate, default_vehicles, evaluate, finetune_on, scalability_sweep, train_on, Checkpoint, Method, TrainingLog,
    SEEDS,
};
use hqrl_core::warmstart::{warm_start, WarmStartArtifact};
use hqrl_core::{RunConfig, VrpInstance};
use serde_json::json;

pub mod svg;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

pub const SEED_ENV: &str = "HQRL_SEED";

#[derive(Parser, Debug)]
#[command(name = "hqrl", version, about = "Hybrid quantum reinforcement learning for vehicle routing")]
pub struct Cli {
    /// JSON run configuration; missing fields take defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for instances, initialisation and sampling.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for output artifacts (created if missing).
    #[arg(long, global = true, value_name = "DIR", default_value = "out")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a seeded random instance to instance.json.
    GenInstance {
        #[command(flatten)]
        size: SizeArgs,
    },
    /// Optimise QAOA angles on the depot-nearest subgraph; writes warmstart.json.
    Warmstart {
        #[command(flatten)]
        size: SizeArgs,
        #[arg(long, value_name = "FILE")]
        instance: Option<PathBuf>,
    },
    /// Train an agent; writes config.json, metrics.csv, checkpoint.json and routes.json.
    Train {
        #[command(flatten)]
        size: SizeArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_name = "FILE")]
        instance: Option<PathBuf>,
    },
    /// Continue training a checkpoint, possibly on a larger instance.
    Finetune {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[command(flatten)]
        size: SizeArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_name = "FILE")]
        instance: Option<PathBuf>,
    },
    /// Greedy rollout of a checkpoint; writes routes.json and evaluation.json.
    Evaluate {
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "FILE")]
        instance: Option<PathBuf>,
    },
    /// Ablation table over sizes and seeds; writes comparison.csv.
    Ablate {
        #[arg(long, value_delimiter = ',', default_values_t = [5, 8])]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Method and resource comparison across sizes; writes comparison.csv.
    Sweep {
        #[arg(long, value_delimiter = ',', default_values_t = [5, 8, 15, 25])]
        sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Draw reward curves from metrics.csv files and/or a route map.
    Plot {
        /// metrics.csv to draw; repeat for several curves.
        #[arg(long, value_name = "FILE")]
        metrics: Vec<PathBuf>,
        /// Legend labels, matched to --metrics by position.
        #[arg(long)]
        label: Vec<String>,
        /// routes.json to draw as routes.svg.
        #[arg(long, value_name = "FILE")]
        routes: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        instance: Option<PathBuf>,
        #[command(flatten)]
        size: SizeArgs,
    },
}

#[derive(Args, Debug, Default)]
pub struct SizeArgs {
    /// Number of customers.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of vehicles; defaults to max(1, N/4) when only --n is given.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    #[arg(long)]
    pub episodes: Option<usize>,
    /// hqrl-qaoa or vanilla-qrl.
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub no_warm_start: bool,
    #[arg(long)]
    pub no_value_baseline: bool,
}

#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

fn fail_line(kind: &str, message: &str) -> String {
    let message = message.split_whitespace().collect::<Vec<_>>().join(" ");
    json!({ "error": kind, "message": message }).to_string()
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return EXIT_OK;
        }
        Err(e) => {
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", fail_line("usage", first));
            return EXIT_USAGE;
        }
    };
    match execute(&cli) {
        Ok(artifacts) => {
            println!("{}", json!({ "status": "ok", "artifacts": artifacts }));
            EXIT_OK
        }
        Err(e) if e.is::<UsageError>() => {
            eprintln!("{}", fail_line("usage", &e.to_string()));
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("{}", fail_line("runtime", &format!("{e:#}")));
            EXIT_RUNTIME
        }
    }
}

/// Config file contents plus the keys it set explicitly.
struct FileConfig {
    config: RunConfig,
    keys: BTreeSet<String>,
}

fn load_config(path: Option<&Path>, base: RunConfig) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig { config: base, keys: BTreeSet::new() });
    };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("config {} is not JSON: {e}", path.display())))?;
    let serde_json::Value::Object(map) = &value else {
        return Err(usage(format!("config {} must be a JSON object", path.display())));
    };
    let keys = map.keys().cloned().collect();
    let config = serde_json::from_value(value).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
    Ok(FileConfig { config, keys })
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| usage(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(std::env::VarError::NotPresent) => Ok(None),
        Err(e) => Err(usage(format!("{SEED_ENV}: {e}"))),
    }
}

/// Seed from the flag, the config file, or the environment, in that order.
fn explicit_seed(cli: &Cli, file: &FileConfig) -> Result<Option<u64>> {
    if cli.seed.is_some() {
        return Ok(cli.seed);
    }
    if file.keys.contains("seed") {
        return Ok(Some(file.config.seed));
    }
    env_seed()
}

fn resolve(cli: &Cli, base: RunConfig, size: &SizeArgs, run: &RunArgs) -> Result<RunConfig> {
    let file = load_config(cli.config.as_deref(), base)?;
    let mut config = file.config.clone();
    if let Some(seed) = explicit_seed(cli, &file)? {
        config.seed = seed;
    }
    if let Some(n) = size.n {
        config.n_customers = n;
        if size.k.is_none() && !file.keys.contains("n_vehicles") {
            config.n_vehicles = default_vehicles(n);
        }
    }
    if let Some(k) = size.k {
        config.n_vehicles = k;
    }
    if let Some(e) = run.episodes {
        config.episodes = e;
    }
    if let Some(m) = run.method {
        config.method = m;
    }
    if run.no_warm_start {
        config.warm_start = false;
    }
    if run.no_value_baseline {
        config.value_baseline = false;
    }
    config.validate().map_err(|e| usage(format!("invalid configuration: {e}")))?;
    Ok(config)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} {}", path.display()))
}

/// Loads `--instance` and pins the config's size to it.
fn instance_for(config: &mut RunConfig, path: Option<&Path>, size: &SizeArgs) -> Result<VrpInstance> {
    let Some(path) = path else {
        return Ok(config.instance()?);
    };
    let inst: VrpInstance = read_json(path, "instance")?;
    if size.n.is_some_and(|n| n != inst.n_customers()) || size.k.is_some_and(|k| k != inst.n_vehicles()) {
        return Err(usage("--n/--k disagree with the --instance file"));
    }
    config.n_customers = inst.n_customers();
    config.n_vehicles = inst.n_vehicles();
    config.validate().map_err(|e| usage(format!("invalid configuration: {e}")))?;
    Ok(inst)
}

/// Writes artifacts into the output directory, refusing to overwrite any
/// input file.
struct Output {
    dir: PathBuf,
    inputs: Vec<PathBuf>,
    written: Vec<String>,
}

impl Output {
    fn new(dir: &Path, inputs: &[Option<&Path>]) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        let inputs = inputs.iter().flatten().filter_map(|p| p.canonicalize().ok()).collect();
        Ok(Self { dir: dir.to_path_buf(), inputs, written: Vec::new() })
    }

    fn path(&self, name: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Ok(canon) = path.canonicalize() {
            if self.inputs.contains(&canon) {
                return Err(usage(format!("refusing to overwrite input file {}", path.display())));
            }
        }
        Ok(path)
    }

    fn record(&mut self, path: &Path) {
        self.written.push(path.display().to_string());
    }

    fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.path(name)?;
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.record(&path);
        Ok(())
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }
}

fn execute(cli: &Cli) -> Result<Vec<String>> {
    let none = SizeArgs::default();
    let no_run = RunArgs::default();
    let mut out;
    match &cli.command {
        Command::GenInstance { size } => {
            let config = resolve(cli, RunConfig::default(), size, &no_run)?;
            out = Output::new(&cli.out, &[cli.config.as_deref()])?;
            out.json("instance.json", &generate_instance(config.n_customers, config.n_vehicles, config.seed)?)?;
        }
        Command::Warmstart { size, instance } => {
            let mut config = resolve(cli, RunConfig::default(), size, &no_run)?;
            let inst = instance_for(&mut config, instance.as_deref(), size)?;
            out = Output::new(&cli.out, &[cli.config.as_deref(), instance.as_deref()])?;
            let (sub, _, angles) = warm_start(&inst, config.n_qubits, config.p, config.qaoa_max_iters, config.seed)?;
            out.json("warmstart.json", &WarmStartArtifact::new(&angles, config.seed, &sub))?;
        }
        Command::Train { size, run, instance } => {
            let mut config = resolve(cli, RunConfig::default(), size, run)?;
            check_learned(&config)?;
            let inst = instance_for(&mut config, instance.as_deref(), size)?;
            out = Output::new(&cli.out, &[cli.config.as_deref(), instance.as_deref()])?;
            let (log, ck) = train_on(&config, &inst)?;
            write_run(&mut out, &config, &log, &ck, &inst)?;
        }
        Command::Finetune { checkpoint, size, run, instance } => {
            let ck = load_checkpoint(checkpoint)?;
            let mut config = resolve(cli, ck.config.clone(), size, run)?;
            check_learned(&config)?;
            let inst = instance_for(&mut config, instance.as_deref(), size)?;
            out = Output::new(&cli.out, &[cli.config.as_deref(), instance.as_deref(), Some(checkpoint)])?;
            let (log, new_ck) = finetune_on(&ck, &config, &inst)?;
            write_run(&mut out, &config, &log, &new_ck, &inst)?;
        }
        Command::Evaluate { checkpoint, instance } => {
            let ck = load_checkpoint(checkpoint)?;
            let mut config = resolve(cli, ck.config.clone(), &none, &no_run)?;
            let inst = instance_for(&mut config, instance.as_deref(), &none)?;
            out = Output::new(&cli.out, &[cli.config.as_deref(), instance.as_deref(), Some(checkpoint)])?;
            let eval = evaluate(&ck, &inst)?;
            out.json("routes.json", &RouteSolution::new(&inst, &eval.routes)?)?;
            out.json("evaluation.json", &eval)?;
        }
        Command::Ablate { sizes, seeds, run } => {
            let config = resolve(cli, RunConfig::default(), &none, run)?;
            let seeds = seed_list(cli, seeds)?;
            out = Output::new(&cli.out, &[cli.config.as_deref()])?;
            let table = ablate(&config, sizes, &seeds)?;
            out.json("config.json", &config)?;
            out.text("comparison.csv", &table.to_csv())?;
        }
        Command::Sweep { sizes, seeds, run } => {
            if sizes.len() < 2 {
                return Err(usage("sweep needs at least two sizes"));
            }
            let config = resolve(cli, RunConfig::default(), &none, run)?;
            let seeds = seed_list(cli, seeds)?;
            out = Output::new(&cli.out, &[cli.config.as_deref()])?;
            let table = scalability_sweep(sizes, &config, &seeds)?;
            out.json("config.json", &config)?;
            out.text("comparison.csv", &table.to_csv())?;
        }
        Command::Plot { metrics, label, routes, instance, size } => {
            if metrics.is_empty() && routes.is_none() {
                return Err(usage("plot needs --metrics and/or --routes"));
            }
            if label.len() > metrics.len() {
                return Err(usage("more --label values than --metrics files"));
            }
            let mut config = resolve(cli, RunConfig::default(), size, &no_run)?;
            let mut inputs: Vec<Option<&Path>> = vec![cli.config.as_deref(), instance.as_deref(), routes.as_deref()];
            inputs.extend(metrics.iter().map(|m| Some(m.as_path())));
            out = Output::new(&cli.out, &inputs)?;
            if !metrics.is_empty() {
                let curves = metrics
                    .iter()
                    .enumerate()
                    .map(|(i, path)| {
                        let label = label.get(i).cloned().unwrap_or_else(|| default_label(path));
                        Ok(svg::Curve { label, rewards: read_metrics(path)? })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let path = out.path("curves.svg")?;
                svg::write_curves(&curves, &path)?;
                out.record(&path);
            }
            if let Some(routes) = routes {
                let inst = instance_for(&mut config, instance.as_deref(), size)?;
                let solution: RouteSolution = read_json(routes, "routes")?;
                let path = out.path("routes.svg")?;
                svg::emit_route_svg(&inst, &solution.as_routes(), &path)?;
                out.record(&path);
            }
        }
    }
    Ok(out.written)
}

fn check_learned(config: &RunConfig) -> Result<()> {
    if !config.method.is_learned() {
        return Err(usage(format!("method {} is not trainable", config.method)));
    }
    Ok(())
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).with_context(|| format!("reading checkpoint {}", path.display()))?;
    Checkpoint::from_json(&text).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn write_run(
    out: &mut Output,
    config: &RunConfig,
    log: &TrainingLog,
    ck: &Checkpoint,
    inst: &VrpInstance,
) -> Result<()> {
    out.json("config.json", config)?;
    if let Some(ws) = &log.warm_start {
        out.json("warmstart.json", ws)?;
    }
    out.text("metrics.csv", &log.to_csv())?;
    let mut ck_json = ck.to_json()?;
    ck_json.push('\n');
    out.text("checkpoint.json", &ck_json)?;
    let eval = evaluate(ck, inst)?;
    out.json("routes.json", &RouteSolution::new(inst, &eval.routes)?)?;
    out.json(
        "summary.json",
        &json!({
            "episodes": log.records.len(),
            "wall_time_secs": log.wall_time_secs,
            "peak_memory_bytes": log.peak_memory_bytes,
            "initial_eval_reward": log.initial_eval_reward,
            "final_cost": eval.cost,
            "normalized_cost": eval.normalized_cost,
            "oracle": eval.oracle,
        }),
    )
}

/// `--seeds`, else a single explicitly chosen seed, else the standard set.
fn seed_list(cli: &Cli, seeds: &[u64]) -> Result<Vec<u64>> {
    if !seeds.is_empty() {
        return Ok(seeds.to_vec());
    }
    let file = load_config(cli.config.as_deref(), RunConfig::default())?;
    Ok(match explicit_seed(cli, &file)? {
        Some(s) => vec![s],
        None => SEEDS.to_vec(),
    })
}

fn default_label(path: &Path) -> String {
    path.parent()
        .and_then(|p| p.file_name())
        .or_else(|| path.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

/// The `total_reward` column of a metrics.csv file.
pub fn read_metrics(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_metrics(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_metrics(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| anyhow!("empty file"))?;
    let col =
        header.split(',').position(|h| h.trim() == "total_reward").ok_or_else(|| anyhow!("no total_reward column"))?;
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let cell = l.split(',').nth(col).ok_or_else(|| anyhow!("row {} is short", i + 1))?;
            cell.trim().parse::<f64>().with_context(|| format!("row {}: {cell:?}", i + 1))
        })
        .collect::<Result<Vec<_>>>()
        .and_then(|v| if v.is_empty() { bail!("no episodes") } else { Ok(v) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_round_trip() {
        let csv = "episode,total_reward,policy_loss,value_loss,route_cost\n0,-4.5,0.1,0.2,4.5\n1,-3.25,0,0,3.25\n";
        assert_eq!(parse_metrics(csv).unwrap(), vec![-4.5, -3.25]);
        assert!(parse_metrics("episode,route_cost\n0,1\n").is_err());
        assert!(parse_metrics("episode,total_reward\n").is_err());
    }

    #[test]
    fn failure_line_is_single_json_object() {
        let line = fail_line("usage", "bad\nthing  here");
        assert!(!line.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["message"], "bad thing here");
    }

    #[test]
    fn label_from_run_directory() {
        assert_eq!(default_label(Path::new("runs/hqrl/metrics.csv")), "hqrl");
    }
}
