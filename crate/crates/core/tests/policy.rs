use std::f64::consts::PI;

use hqrl_core::env::{generate_instance, EnvConfig, Trajectory, VrpEnv};
use hqrl_core::policy::{
    apply_update, reinforce_gradients, ActionDistribution, HybridPolicy, InitScales, LearningRates, OptimizerState,
    PolicyParams, PolicyShape, ValueParams,
};
use hqrl_core::sim::ZZHamiltonian;
use hqrl_core::warmstart::{build_cost_hamiltonian, build_subgraph, export_warm_start, optimize_angles};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Case {
    policy: HybridPolicy,
    params: PolicyParams,
    value: ValueParams,
    traj: Trajectory,
}

/// Random parameters and a 3-step trajectory sampled from them.
fn case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inst = generate_instance(6, 2, seed).unwrap();
    let h = build_cost_hamiltonian(&build_subgraph(&inst, 4).unwrap()).unwrap();
    let shape = PolicyShape::new(6, 2);
    let policy = HybridPolicy::new(shape, &h).unwrap();
    let mut params = PolicyParams::random(shape, InitScales { encoder_std: 2.0, head_std: 1.0 }, &mut rng);
    for l in params.qaoa_angles.iter_mut() {
        *l = [rng.random_range(-PI..PI), rng.random_range(-PI..PI)];
    }
    let value = ValueParams::random(shape.state_dim(), &mut rng);
    let env = VrpEnv::new(inst, EnvConfig::default());
    let mut state = env.reset();
    let (mut states, mut masks, mut actions, mut rewards) = (vec![], vec![], vec![], vec![]);
    for _ in 0..3 {
        let s = env.encode_state(&state).unwrap();
        let mask = env.valid_action_mask(&state).unwrap();
        let a = policy.forward(&s, &params, &mask).unwrap().sample(&mut rng);
        let out = env.step(&state, a).unwrap();
        states.push(s);
        masks.push(mask);
        actions.push(a);
        rewards.push(out.reward);
        state = out.next_state;
    }
    let traj = Trajectory::new(states, masks, actions, rewards, 0.99).unwrap();
    Case { policy, params, value, traj }
}

fn policy_loss(c: &Case, params: &PolicyParams, baseline: bool) -> f64 {
    (0..c.traj.len())
        .map(|t| {
            let s = &c.traj.states[t];
            let v = c.value.forward(s).unwrap().1;
            let adv = c.traj.normalized_returns[t] - if baseline { v } else { 0.0 };
            let p = c.policy.forward(s, params, &c.traj.masks[t]).unwrap().probabilities[c.traj.actions[t]];
            -p.ln() * adv
        })
        .sum()
}

fn value_loss(c: &Case, value: &ValueParams) -> f64 {
    let t = c.traj.len() as f64;
    c.traj
        .states
        .iter()
        .zip(&c.traj.normalized_returns)
        .map(|(s, g)| (value.forward(s).unwrap().1 - g).powi(2) / t)
        .sum()
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
}

#[test]
fn hybrid_gradient_matches_finite_differences() {
    const H: f64 = 1e-5;
    for seed in 0..6 {
        let c = case(seed);
        for baseline in [true, false] {
            let g = reinforce_gradients(&c.traj, &c.policy, &c.params, &c.value, baseline).unwrap();
            assert!((g.policy_loss - policy_loss(&c, &c.params, baseline)).abs() < 1e-12);
            let flat = c.params.to_flat();
            for (k, gk) in g.policy.iter().enumerate() {
                let at = |d: f64| {
                    let mut f = flat.clone();
                    f[k] += d;
                    let mut p = c.params.clone();
                    p.set_flat(&f).unwrap();
                    policy_loss(&c, &p, baseline)
                };
                let fd = (at(H) - at(-H)) / (2.0 * H);
                assert!(rel_err(*gk, fd) < 1e-5, "seed {seed} policy[{k}]: {gk} vs {fd}");
            }
        }
        let g = reinforce_gradients(&c.traj, &c.policy, &c.params, &c.value, true).unwrap();
        let vflat = c.value.to_flat();
        for (k, gk) in g.value.iter().enumerate() {
            let at = |d: f64| {
                let mut f = vflat.clone();
                f[k] += d;
                let mut v = c.value.clone();
                v.set_flat(&f).unwrap();
                value_loss(&c, &v)
            };
            let fd = (at(H) - at(-H)) / (2.0 * H);
            assert!(rel_err(*gk, fd) < 1e-5, "seed {seed} value[{k}]: {gk} vs {fd}");
        }
    }
}

#[test]
fn zero_advantage_gives_zero_policy_gradient() {
    let mut c = case(3);
    c.traj.normalized_returns = vec![0.0; 3];
    let g = reinforce_gradients(&c.traj, &c.policy, &c.params, &c.value, false).unwrap();
    assert!(g.policy.iter().all(|&x| x == 0.0));
    assert_eq!(g.policy_loss, 0.0);
}

#[test]
fn exact_value_prediction_has_zero_loss() {
    let mut c = case(4);
    c.value = ValueParams::zeros(c.value.state_dim());
    c.value.output.bias[0] = 0.25;
    c.traj.normalized_returns = vec![0.25; 3];
    let g = reinforce_gradients(&c.traj, &c.policy, &c.params, &c.value, true).unwrap();
    assert_eq!(g.value_loss, 0.0);
    assert!(g.value.iter().all(|&x| x == 0.0));
}

#[test]
fn sampling_frequencies_within_three_sigma() {
    let dist =
        ActionDistribution::masked_softmax(&[0.3, -1.0, 2.0, 0.0, 0.7], &[true, true, false, true, true]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let draws = 100_000;
    let mut counts = [0usize; 5];
    for _ in 0..draws {
        counts[dist.sample(&mut rng)] += 1;
    }
    assert_eq!(counts[2], 0);
    for (c, p) in counts.iter().zip(&dist.probabilities) {
        let mean = draws as f64 * p;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((*c as f64 - mean).abs() <= 3.0 * sigma, "count {c} expected {mean} ± {sigma}");
    }
}

#[test]
fn circuit_resources_constant_in_problem_size() {
    let mut seen = Vec::new();
    for n in [5, 8, 12, 25] {
        let inst = generate_instance(n, (n / 4).max(1), 1).unwrap();
        let h = build_cost_hamiltonian(&build_subgraph(&inst, 4).unwrap()).unwrap();
        let m = HybridPolicy::new(PolicyShape::new(n, inst.n_vehicles()), &h).unwrap().metrics();
        assert_eq!(m.qubit_count, 4);
        seen.push(m.depth);
    }
    assert!(seen.windows(2).all(|w| w[0] == w[1]));
    assert!(seen[0] <= 18);
}

#[test]
fn warm_start_injection_is_bit_exact() {
    let inst = generate_instance(8, 2, 101).unwrap();
    let h = build_cost_hamiltonian(&build_subgraph(&inst, 4).unwrap()).unwrap();
    let angles = optimize_angles(&h, 2, 150, 101).unwrap();
    let mut params =
        PolicyParams::random(PolicyShape::new(8, 2), InitScales::default(), &mut ChaCha8Rng::seed_from_u64(0));
    let before = params.clone();
    export_warm_start(&angles, &mut params).unwrap();
    for (l, a) in params.qaoa_angles.iter().enumerate() {
        assert_eq!(a[0].to_bits(), angles.gammas[l].to_bits());
        assert_eq!(a[1].to_bits(), angles.betas[l].to_bits());
    }
    assert_eq!(params.rotation_angles, before.rotation_angles);
    assert_eq!(params.head_weights, before.head_weights);
}

/// One-step episodes from a fixed state with a fixed reward per action.
#[test]
fn bandit_loss_decreases() {
    let h = ZZHamiltonian::new(4, vec![]).unwrap();
    let shape = PolicyShape::new(3, 1);
    let policy = HybridPolicy::new(shape, &h).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut params = PolicyParams::random(shape, InitScales { encoder_std: 1.0, head_std: 1.0 }, &mut rng);
    let mut value = ValueParams::zeros(shape.state_dim());
    let mut opt = OptimizerState::new(&params, &value);
    let state: Vec<f64> = (0..shape.state_dim()).map(|i| (i as f64 * 0.37).sin().abs()).collect();
    let mask = vec![true; 3];
    let payoff = [1.0, -1.0, -1.0];
    let expected_loss = |p: &PolicyParams| {
        let probs = policy.forward(&state, p, &mask).unwrap().probabilities;
        -probs.iter().zip(payoff).map(|(q, r)| q * r).sum::<f64>()
    };
    let start = expected_loss(&params);
    let lr = LearningRates { quantum: 0.05, classical: 0.05 };
    for a in (0..50).map(|i| i % 3) {
        let traj = Trajectory {
            states: vec![state.clone()],
            masks: vec![mask.clone()],
            actions: vec![a],
            rewards: vec![payoff[a]],
            returns: vec![payoff[a]],
            normalized_returns: vec![payoff[a]],
        };
        let g = reinforce_gradients(&traj, &policy, &params, &value, false).unwrap();
        apply_update(&mut params, &mut value, &g, &mut opt, lr).unwrap();
    }
    assert!(expected_loss(&params) < start, "{} !< {start}", expected_loss(&params));
}

proptest! {
    #[test]
    fn masked_softmax_is_a_distribution(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..12);
        let logits: Vec<f64> = (0..n).map(|_| rng.random_range(-30.0..30.0)).collect();
        let mut mask: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
        let keep = rng.random_range(0..n);
        mask[keep] = true;
        let d = ActionDistribution::masked_softmax(&logits, &mask).unwrap();
        prop_assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for (p, m) in d.probabilities.iter().zip(&mask) {
            if !m {
                prop_assert_eq!(*p, 0.0);
            }
        }
        prop_assert!(mask[d.greedy()]);
        let c = rng.random_range(-100.0..100.0);
        let shifted: Vec<f64> = logits.iter().map(|l| l + c).collect();
        let e = ActionDistribution::masked_softmax(&shifted, &mask).unwrap();
        for (a, b) in d.probabilities.iter().zip(&e.probabilities) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn policy_forward_on_random_states(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = case(seed % 7);
        let s: Vec<f64> = (0..c.policy.shape().state_dim()).map(|_| rng.random_range(-1.0..2.0)).collect();
        let mask: Vec<bool> = (0..6).map(|i| i == 0 || rng.random_bool(0.5)).collect();
        let angles = c.policy.encode_observation(&s, &c.params).unwrap();
        prop_assert!(angles.iter().all(|a| a.abs() < PI));
        let d = c.policy.forward(&s, &c.params, &mask).unwrap();
        prop_assert!((d.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let (hidden, v) = c.value.forward(&s).unwrap();
        prop_assert!(hidden.iter().all(|h| h.abs() <= 1.0) && v.is_finite());
    }
}
