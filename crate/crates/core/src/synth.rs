//! Random MDP/policy generators for property tests and benchmarks.

use rand::Rng;

use crate::mdp::{StochasticPolicy, TabularMdp};
use crate::sim::rng_from_seed;

fn random_distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut row: Vec<f64> = (0..n).map(|_| 0.01 + rng.gen::<f64>()).collect();
    let sum: f64 = row.iter().sum();
    for x in &mut row {
        *x /= sum;
    }
    // Push rounding drift into the largest entry so the row sums exactly to 1.
    let total: f64 = row.iter().sum();
    let imax = row
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    row[imax] += 1.0 - total;
    row
}

pub fn random_mdp(n_states: usize, n_actions: usize, gamma: f64, seed: u64) -> TabularMdp {
    let mut rng = rng_from_seed(seed);
    let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
    for _ in 0..n_states * n_actions {
        transition.extend(random_distribution(&mut rng, n_states));
    }
    let reward: Vec<f64> = (0..n_states * n_actions).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let init = random_distribution(&mut rng, n_states);
    TabularMdp::new(n_states, n_actions, transition, reward, gamma, init)
        .expect("generator output is valid")
}

pub fn random_policy(n_states: usize, n_actions: usize, seed: u64) -> StochasticPolicy {
    let mut rng = rng_from_seed(seed);
    let mut probs = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states {
        probs.extend(random_distribution(&mut rng, n_actions));
    }
    StochasticPolicy::new(n_states, n_actions, probs).expect("generator output is valid")
}
