//! Seeded rollout sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{CoreError, Result};
use crate::mdp::{StochasticPolicy, Step, TabularMdp, Trajectory};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream seed from a root seed and a label.
/// SplitMix64 finalizer; stable across platforms.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut z = root ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn sample_categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Roll `n` trajectories of at most `horizon` steps, deterministically in `seed`.
pub fn sample_trajectories(
    mdp: &TabularMdp,
    policy: &StochasticPolicy,
    n: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<Trajectory>> {
    if n == 0 || horizon == 0 {
        return Err(CoreError::InvalidInput("n and horizon must be positive".into()));
    }
    if !policy.matches(mdp) {
        return Err(CoreError::InvalidInput("policy shape does not match MDP".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut state = sample_categorical(&mut rng, mdp.init_dist());
        let mut steps = Vec::with_capacity(horizon);
        for _ in 0..horizon {
            let action = sample_categorical(&mut rng, policy.action_row(state));
            let next = sample_categorical(&mut rng, mdp.transition_row(state, action));
            steps.push(Step { state, action, reward: mdp.r(state, action), next_state: next });
            state = next;
        }
        out.push(Trajectory { steps });
    }
    Ok(out)
}

/// Draw `n` state-action pairs distributed as the (horizon-truncated)
/// normalized discounted occupancy of `policy`: the step index is geometric
/// in gamma, truncated at `horizon`.
pub fn sample_occupancy_transitions(
    mdp: &TabularMdp,
    policy: &StochasticPolicy,
    n: usize,
    horizon: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    if n == 0 || horizon == 0 {
        return Err(CoreError::InvalidInput("n and horizon must be positive".into()));
    }
    if !policy.matches(mdp) {
        return Err(CoreError::InvalidInput("policy shape does not match MDP".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let t = sample_truncated_geometric(&mut rng, mdp.gamma, horizon);
        let mut state = sample_categorical(&mut rng, mdp.init_dist());
        let mut action = sample_categorical(&mut rng, policy.action_row(state));
        for _ in 0..t {
            state = sample_categorical(&mut rng, mdp.transition_row(state, action));
            action = sample_categorical(&mut rng, policy.action_row(state));
        }
        out.push((state, action));
    }
    Ok(out)
}

/// Geometric(1-gamma) step index conditioned on t < horizon.
fn sample_truncated_geometric(rng: &mut impl Rng, gamma: f64, horizon: usize) -> usize {
    loop {
        let u: f64 = rng.gen::<f64>();
        // P(T >= t) = gamma^t, so T = floor(log(u)/log(gamma)).
        let t = if gamma == 0.0 { 0 } else { (u.ln() / gamma.ln()).floor() as usize };
        if t < horizon {
            return t;
        }
    }
}

/// Weighted draw of transitions from an existing rollout buffer, with step
/// weights gamma^t. Used by the trainer to form agent batches matching the
/// discounted occupancy of the rollout policy.
pub fn sample_discounted_from_rollouts(
    rollouts: &[Trajectory],
    gamma: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, usize)>> {
    let mut flat: Vec<(usize, usize)> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for traj in rollouts {
        for (t, step) in traj.steps.iter().enumerate() {
            flat.push((step.state, step.action));
            weights.push(gamma.powi(t as i32));
        }
    }
    if flat.is_empty() {
        return Err(CoreError::InvalidInput("empty rollout buffer".into()));
    }
    let total: f64 = weights.iter().sum();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut u = rng.gen::<f64>() * total;
        let mut idx = flat.len() - 1;
        for (i, &w) in weights.iter().enumerate() {
            if u < w {
                idx = i;
                break;
            }
            u -= w;
        }
        out.push(flat[idx]);
    }
    Ok(out)
}
