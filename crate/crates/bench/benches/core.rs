use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hqrl_core::env::{generate_instance, EnvConfig, Trajectory, VrpEnv};
use hqrl_core::policy::{reinforce_gradients, HybridPolicy, InitScales, PolicyParams, PolicyShape, ValueParams};
use hqrl_core::sim::{GateOp, StateVector};
use hqrl_core::training::{brute_force_optimal, nearest_neighbor, train, RunConfig};
use hqrl_core::warmstart::{build_cost_hamiltonian, build_subgraph, optimize_angles};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn statevector(c: &mut Criterion) {
    let mut g = c.benchmark_group("statevector");
    for n in [4, 8, 12] {
        g.bench_with_input(BenchmarkId::new("layer", n), &n, |b, &n| {
            let mut s = StateVector::plus(n).unwrap();
            b.iter(|| {
                for q in 0..n {
                    s.apply(&GateOp::ry(q, 0.3)).unwrap();
                    s.apply(&GateOp::rzz(q, (q + 1) % n, 0.7)).unwrap();
                }
                black_box(s.expectation_z(0).unwrap())
            })
        });
    }
    g.finish();
}

struct Fixture {
    env: VrpEnv,
    policy: HybridPolicy,
    params: PolicyParams,
    value: ValueParams,
}

fn fixture(n: usize) -> Fixture {
    let inst = generate_instance(n, (n / 4).max(1), 7).unwrap();
    let h = build_cost_hamiltonian(&build_subgraph(&inst, 4).unwrap()).unwrap();
    let shape = PolicyShape::new(n, inst.n_vehicles());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    Fixture {
        policy: HybridPolicy::new(shape, &h).unwrap(),
        params: PolicyParams::random(shape, InitScales::default(), &mut rng),
        value: ValueParams::random(shape.state_dim(), &mut rng),
        env: VrpEnv::new(inst, EnvConfig::default()),
    }
}

fn greedy_trajectory(f: &Fixture) -> Trajectory {
    let mut state = f.env.reset();
    let (mut states, mut masks, mut actions, mut rewards) = (vec![], vec![], vec![], vec![]);
    while !state.done {
        let s = f.env.encode_state(&state).unwrap();
        let mask = f.env.valid_action_mask(&state).unwrap();
        let a = f.policy.forward(&s, &f.params, &mask).unwrap().greedy();
        let out = f.env.step(&state, a).unwrap();
        states.push(s);
        masks.push(mask);
        actions.push(a);
        rewards.push(out.reward);
        state = out.next_state;
    }
    Trajectory::new(states, masks, actions, rewards, 0.99).unwrap()
}

fn policy(c: &mut Criterion) {
    let mut g = c.benchmark_group("policy");
    for n in [8, 25] {
        let f = fixture(n);
        let state = f.env.encode_state(&f.env.reset()).unwrap();
        let mask = f.env.valid_action_mask(&f.env.reset()).unwrap();
        g.bench_with_input(BenchmarkId::new("forward", n), &n, |b, _| {
            b.iter(|| black_box(f.policy.forward(&state, &f.params, &mask).unwrap()))
        });
        g.bench_with_input(BenchmarkId::new("greedy_episode", n), &n, |b, _| {
            b.iter(|| black_box(greedy_trajectory(&f)))
        });
        let traj = greedy_trajectory(&f);
        g.bench_with_input(BenchmarkId::new("episode_gradients", n), &n, |b, _| {
            b.iter(|| black_box(reinforce_gradients(&traj, &f.policy, &f.params, &f.value, true).unwrap()))
        });
    }
    g.finish();
}

fn oracles(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracles");
    g.sample_size(10);
    for n in [6, 9] {
        let inst = generate_instance(n, 2, 7).unwrap();
        g.bench_with_input(BenchmarkId::new("brute_force", n), &inst, |b, i| {
            b.iter(|| black_box(brute_force_optimal(i).unwrap()))
        });
    }
    let inst = generate_instance(25, 6, 7).unwrap();
    g.bench_function("nearest_neighbor/25", |b| b.iter(|| black_box(nearest_neighbor(&inst).unwrap())));
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(10);
    let inst = generate_instance(8, 2, 7).unwrap();
    let h = build_cost_hamiltonian(&build_subgraph(&inst, 4).unwrap()).unwrap();
    g.bench_function("warm_start_p2", |b| b.iter(|| black_box(optimize_angles(&h, 2, 150, 7).unwrap())));
    let config = RunConfig { episodes: 20, ..RunConfig::default() };
    g.bench_function("train_20_episodes_n8", |b| b.iter(|| black_box(train(&config).unwrap())));
    g.finish();
}

criterion_group!(benches, statevector, policy, oracles, pipeline);
criterion_main!(benches);
