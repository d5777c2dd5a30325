//! Reference solvers: exact search for small instances, a greedy
//! nearest-neighbour construction, and uniformly random rollouts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{distance, route_cost, EnvConfig, VrpEnv, VrpInstance};
use crate::error::{Error, Result};

/// Largest instance accepted by [`brute_force_optimal`].
pub const BRUTE_FORCE_MAX: usize = 9;

/// Exact minimum-cost routing with at most `K` non-empty routes.
///
/// Every subset of customers gets its optimal closed tour from the depot by
/// enumerating visiting orders with a subset recursion, then subsets are
/// split among vehicles by a second exhaustive recursion over partitions.
pub fn brute_force_optimal(instance: &VrpInstance) -> Result<(Vec<Vec<usize>>, f64)> {
    let n = instance.n_customers();
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge(n, BRUTE_FORCE_MAX));
    }
    let cs = instance.customers();
    let depot = instance.depot();
    let full = (1usize << n) - 1;

    // path[mask][last]: shortest depot → … → last path through exactly `mask`
    let mut path = vec![vec![f64::INFINITY; n]; full + 1];
    let mut prev = vec![vec![usize::MAX; n]; full + 1];
    for i in 0..n {
        path[1 << i][i] = distance(depot, cs[i]);
    }
    for mask in 1..=full {
        for last in 0..n {
            let base = path[mask][last];
            if mask & (1 << last) == 0 || !base.is_finite() {
                continue;
            }
            for next in 0..n {
                if mask & (1 << next) != 0 {
                    continue;
                }
                let m2 = mask | (1 << next);
                let c = base + distance(cs[last], cs[next]);
                if c < path[m2][next] {
                    path[m2][next] = c;
                    prev[m2][next] = last;
                }
            }
        }
    }
    let mut tour = vec![(0.0, usize::MAX); full + 1];
    for (mask, t) in tour.iter_mut().enumerate().skip(1) {
        *t = (0..n)
            .filter(|&l| mask & (1 << l) != 0)
            .map(|l| (path[mask][l] + distance(cs[l], depot), l))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .expect("non-empty mask");
    }

    // split[k][mask]: best cost serving `mask` with at most k vehicles
    let k_max = instance.n_vehicles();
    let mut split = vec![vec![f64::INFINITY; full + 1]; k_max + 1];
    let mut choice = vec![vec![0usize; full + 1]; k_max + 1];
    split[0][0] = 0.0;
    for k in 1..=k_max {
        split[k][0] = 0.0;
        for mask in 1..=full {
            let low = mask & mask.wrapping_neg();
            let mut best = split[k - 1][mask];
            let mut pick = 0;
            let mut sub = mask;
            while sub > 0 {
                if sub & low != 0 {
                    let c = tour[sub].0 + split[k - 1][mask ^ sub];
                    if c < best {
                        best = c;
                        pick = sub;
                    }
                }
                sub = (sub - 1) & mask;
            }
            split[k][mask] = best;
            choice[k][mask] = pick;
        }
    }

    let mut routes = Vec::with_capacity(k_max);
    let mut mask = full;
    let mut k = k_max;
    while mask != 0 {
        let sub = choice[k][mask];
        if sub != 0 {
            routes.push(rebuild_path(&prev, sub, tour[sub].1));
            mask ^= sub;
        }
        k -= 1;
    }
    routes.resize(k_max, Vec::new());
    let cost = route_cost(instance, &routes)?;
    Ok((routes, cost))
}

fn rebuild_path(prev: &[Vec<usize>], mut mask: usize, mut last: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while last != usize::MAX {
        out.push(last);
        let p = prev[mask][last];
        mask ^= 1 << last;
        last = p;
    }
    out.reverse();
    out
}

/// Greedy construction: at every step the vehicle whose nearest unvisited
/// customer is closest claims it. Ties go to the lower vehicle index, then
/// the lower customer index.
pub fn nearest_neighbor(instance: &VrpInstance) -> Result<(Vec<Vec<usize>>, f64)> {
    let k = instance.n_vehicles();
    let cs = instance.customers();
    let mut pos = vec![instance.depot(); k];
    let mut routes = vec![Vec::new(); k];
    let mut visited = vec![false; cs.len()];
    for _ in 0..cs.len() {
        let mut best = (f64::INFINITY, 0, 0);
        for (v, &p) in pos.iter().enumerate() {
            for c in (0..cs.len()).filter(|&c| !visited[c]) {
                let d = distance(p, cs[c]);
                if d < best.0 {
                    best = (d, v, c);
                }
            }
        }
        let (_, v, city) = best;
        visited[city] = true;
        pos[v] = cs[city];
        routes[v].push(city);
    }
    let cost = route_cost(instance, &routes)?;
    Ok((routes, cost))
}

/// Total reward of one episode choosing uniformly among unvisited cities.
pub fn random_policy_rollout(instance: &VrpInstance, seed: u64) -> Result<f64> {
    random_rollout_with(instance, seed, EnvConfig::default()).map(|(r, _)| r)
}

/// Total reward and the induced routes.
pub fn random_rollout_with(instance: &VrpInstance, seed: u64, config: EnvConfig) -> Result<(f64, Vec<Vec<usize>>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let env = VrpEnv::new(instance.clone(), config);
    let mut state = env.reset();
    let mut total = 0.0;
    while !state.done {
        let open: Vec<usize> = (0..instance.n_customers()).filter(|&c| !state.visited[c]).collect();
        let a = open[rng.random_range(0..open.len())];
        let out = env.step(&state, a)?;
        total += out.reward;
        state = out.next_state;
    }
    Ok((total, state.routes))
}
