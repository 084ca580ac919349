//! Finite MDPs, exact planning and occupancy-measure computation.
//!
//! Everything here is deterministic linear algebra on small tables; it is
//! the substrate both for demonstration generation and for the brute-force
//! theorem checks in [`crate::oracle`].

use nalgebra::{DMatrix, DVector};

use crate::error::{CoreError, Result};

const DIST_TOL: f64 = 1e-12;

/// Finite MDP: transition tensor P(s'|s,a), reward table R(s,a), discount
/// and initial state distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    pub n_states: usize,
    pub n_actions: usize,
    /// Flat [s][a][s'] layout.
    transition: Vec<f64>,
    /// Flat [s][a] layout.
    reward: Vec<f64>,
    pub gamma: f64,
    init_dist: Vec<f64>,
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        gamma: f64,
        init_dist: Vec<f64>,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(CoreError::InvalidInput("empty state or action space".into()));
        }
        if transition.len() != n_states * n_actions * n_states {
            return Err(CoreError::InvalidInput("transition tensor shape mismatch".into()));
        }
        if reward.len() != n_states * n_actions {
            return Err(CoreError::InvalidInput("reward table shape mismatch".into()));
        }
        if init_dist.len() != n_states {
            return Err(CoreError::InvalidInput("init_dist length mismatch".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(CoreError::InvalidInput(format!("gamma {gamma} outside [0,1)")));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(CoreError::InvalidInput("non-finite reward".into()));
        }
        for s in 0..n_states {
            for a in 0..n_actions {
                let row = &transition[(s * n_actions + a) * n_states..][..n_states];
                check_distribution(row, &format!("P(.|{s},{a})"))?;
            }
        }
        check_distribution(&init_dist, "init_dist")?;
        Ok(Self { n_states, n_actions, transition, reward, gamma, init_dist })
    }

    #[inline]
    pub fn p(&self, s: usize, a: usize, s2: usize) -> f64 {
        self.transition[(s * self.n_actions + a) * self.n_states + s2]
    }

    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        &self.transition[(s * self.n_actions + a) * self.n_states..][..self.n_states]
    }

    #[inline]
    pub fn r(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    pub fn init_dist(&self) -> &[f64] {
        &self.init_dist
    }
}

fn check_distribution(row: &[f64], what: &str) -> Result<()> {
    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(CoreError::InvalidInput(format!("{what}: negative or non-finite entry")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > DIST_TOL {
        return Err(CoreError::InvalidInput(format!("{what}: sums to {sum}, not 1")));
    }
    Ok(())
}

/// Per-state action distribution pi(a|s).
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy {
    pub n_states: usize,
    pub n_actions: usize,
    probs: Vec<f64>,
}

impl StochasticPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(CoreError::InvalidInput("policy table shape mismatch".into()));
        }
        for s in 0..n_states {
            check_distribution(&probs[s * n_actions..][..n_actions], &format!("pi(.|{s})"))?;
        }
        Ok(Self { n_states, n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Self { n_states, n_actions, probs: vec![p; n_states * n_actions] }
    }

    /// One-hot policy from a per-state action choice.
    pub fn deterministic(n_states: usize, n_actions: usize, actions: &[usize]) -> Result<Self> {
        if actions.len() != n_states {
            return Err(CoreError::InvalidInput("action list length mismatch".into()));
        }
        let mut probs = vec![0.0; n_states * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(CoreError::InvalidInput(format!("action {a} out of range")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Ok(Self { n_states, n_actions, probs })
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    #[inline]
    pub fn action_row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..][..self.n_actions]
    }

    pub fn matches(&self, mdp: &TabularMdp) -> bool {
        self.n_states == mdp.n_states && self.n_actions == mdp.n_actions
    }

    /// Convex mixture (1-eps)*self + eps*uniform.
    pub fn mix_with_uniform(&self, eps: f64) -> Self {
        let u = 1.0 / self.n_actions as f64;
        let probs = self.probs.iter().map(|p| (1.0 - eps) * p + eps * u).collect();
        Self { n_states: self.n_states, n_actions: self.n_actions, probs }
    }
}

/// Softmax-parameterized policy; logits are the trainable state.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxPolicy {
    pub n_states: usize,
    pub n_actions: usize,
    pub logits: Vec<f64>,
}

impl SoftmaxPolicy {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, logits: vec![0.0; n_states * n_actions] }
    }

    pub fn probs(&self) -> StochasticPolicy {
        let mut probs = vec![0.0; self.logits.len()];
        for s in 0..self.n_states {
            let row = &self.logits[s * self.n_actions..][..self.n_actions];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for a in 0..self.n_actions {
                let e = (row[a] - max).exp();
                probs[s * self.n_actions + a] = e;
                sum += e;
            }
            for a in 0..self.n_actions {
                probs[s * self.n_actions + a] /= sum;
            }
        }
        StochasticPolicy { n_states: self.n_states, n_actions: self.n_actions, probs }
    }

    /// Mean over states of the per-state action-distribution entropy.
    pub fn mean_entropy(&self) -> f64 {
        let pi = self.probs();
        let mut h = 0.0;
        for s in 0..self.n_states {
            for &p in pi.action_row(s) {
                if p > 0.0 {
                    h -= p * p.ln();
                }
            }
        }
        h / self.n_states as f64
    }
}

/// Normalized discounted state-action visitation distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    pub n_states: usize,
    pub n_actions: usize,
    rho: Vec<f64>,
}

impl OccupancyMeasure {
    pub fn from_table(n_states: usize, n_actions: usize, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != n_states * n_actions {
            return Err(CoreError::InvalidInput("occupancy table shape mismatch".into()));
        }
        if rho.iter().any(|x| !x.is_finite() || *x < -1e-12) {
            return Err(CoreError::InvalidInput("occupancy entry negative or non-finite".into()));
        }
        let sum: f64 = rho.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(CoreError::InvalidInput(format!("occupancy sums to {sum}, not 1")));
        }
        Ok(Self { n_states, n_actions, rho })
    }

    #[inline]
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.rho[s * self.n_actions + a]
    }

    pub fn table(&self) -> &[f64] {
        &self.rho
    }

    pub fn state_marginal(&self, s: usize) -> f64 {
        self.rho[s * self.n_actions..][..self.n_actions].iter().sum()
    }

    /// Max residual of the Bellman flow equation
    /// sum_a rho(s,a) = (1-gamma) mu0(s) + gamma sum_{s',a'} P(s|s',a') rho(s',a').
    pub fn flow_residual(&self, mdp: &TabularMdp) -> f64 {
        let mut worst: f64 = 0.0;
        for s in 0..mdp.n_states {
            let mut inflow = (1.0 - mdp.gamma) * mdp.init_dist()[s];
            for s2 in 0..mdp.n_states {
                for a2 in 0..mdp.n_actions {
                    inflow += mdp.gamma * mdp.p(s2, a2, s) * self.get(s2, a2);
                }
            }
            worst = worst.max((self.state_marginal(s) - inflow).abs());
        }
        worst
    }

    /// Conditional policy pi(a|s) = rho(s,a) / sum_a rho(s,a); uniform on
    /// states with zero mass.
    pub fn recover_policy(&self) -> StochasticPolicy {
        let mut probs = vec![0.0; self.rho.len()];
        for s in 0..self.n_states {
            let mass = self.state_marginal(s);
            if mass > 0.0 {
                for a in 0..self.n_actions {
                    probs[s * self.n_actions + a] = self.get(s, a) / mass;
                }
            } else {
                for a in 0..self.n_actions {
                    probs[s * self.n_actions + a] = 1.0 / self.n_actions as f64;
                }
            }
        }
        StochasticPolicy { n_states: self.n_states, n_actions: self.n_actions, probs }
    }
}

/// One environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
}

/// Chained rollout of at most `horizon` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
}

impl Trajectory {
    pub fn discounted_return(&self, gamma: f64) -> f64 {
        self.steps
            .iter()
            .enumerate()
            .map(|(t, step)| gamma.powi(t as i32) * step.reward)
            .sum()
    }
}

/// Exact value iteration. Greedy ties break toward the lowest action index.
pub fn value_iteration(mdp: &TabularMdp, tol: f64) -> Result<(Vec<f64>, StochasticPolicy)> {
    if tol <= 0.0 {
        return Err(CoreError::InvalidInput("tol must be positive".into()));
    }
    let mut values = vec![0.0; mdp.n_states];
    // Contraction factor gamma < 1 bounds the iteration count for any tol.
    let max_iters = 1_000_000;
    for _ in 0..max_iters {
        let mut next = vec![0.0; mdp.n_states];
        let mut delta: f64 = 0.0;
        for s in 0..mdp.n_states {
            let mut best = f64::NEG_INFINITY;
            for a in 0..mdp.n_actions {
                let q = q_value(mdp, &values, s, a);
                if q > best {
                    best = q;
                }
            }
            next[s] = best;
            delta = delta.max((next[s] - values[s]).abs());
        }
        values = next;
        if delta < tol {
            break;
        }
    }
    let mut actions = vec![0; mdp.n_states];
    for s in 0..mdp.n_states {
        let mut best_a = 0;
        let mut best_q = f64::NEG_INFINITY;
        for a in 0..mdp.n_actions {
            let q = q_value(mdp, &values, s, a);
            if q > best_q {
                best_q = q;
                best_a = a;
            }
        }
        actions[s] = best_a;
    }
    let greedy = StochasticPolicy::deterministic(mdp.n_states, mdp.n_actions, &actions)?;
    Ok((values, greedy))
}

#[inline]
fn q_value(mdp: &TabularMdp, values: &[f64], s: usize, a: usize) -> f64 {
    let mut q = mdp.r(s, a);
    let row = mdp.transition_row(s, a);
    for s2 in 0..mdp.n_states {
        q += mdp.gamma * row[s2] * values[s2];
    }
    q
}

/// Exact policy evaluation: solve (I - gamma P_pi) V = R_pi.
pub fn policy_evaluation(mdp: &TabularMdp, policy: &StochasticPolicy) -> Result<Vec<f64>> {
    if !policy.matches(mdp) {
        return Err(CoreError::InvalidInput("policy shape does not match MDP".into()));
    }
    let n = mdp.n_states;
    let mut mat = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for s in 0..n {
        for a in 0..mdp.n_actions {
            let pa = policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            rhs[s] += pa * mdp.r(s, a);
            let row = mdp.transition_row(s, a);
            for s2 in 0..n {
                mat[(s, s2)] -= mdp.gamma * pa * row[s2];
            }
        }
    }
    let lu = mat.clone().lu();
    let v = lu
        .solve(&rhs)
        .ok_or_else(|| CoreError::Numeric("singular system in policy evaluation".into()))?;
    let residual = (&mat * &v - &rhs).abs().max();
    if residual > 1e-8 {
        return Err(CoreError::Numeric(format!(
            "policy evaluation residual {residual} too large"
        )));
    }
    Ok(v.iter().cloned().collect())
}

/// Exact normalized occupancy measure via the linear flow system.
pub fn occupancy(mdp: &TabularMdp, policy: &StochasticPolicy, tol: f64) -> Result<OccupancyMeasure> {
    if !policy.matches(mdp) {
        return Err(CoreError::InvalidInput("policy shape does not match MDP".into()));
    }
    let n = mdp.n_states;
    // Solve (I - gamma P_pi^T) d = (1 - gamma) mu0 for the state marginal d.
    let mut mat = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for s in 0..n {
        rhs[s] = (1.0 - mdp.gamma) * mdp.init_dist()[s];
        for a in 0..mdp.n_actions {
            let pa = policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            let row = mdp.transition_row(s, a);
            for s2 in 0..n {
                mat[(s2, s)] -= mdp.gamma * pa * row[s2];
            }
        }
    }
    let lu = mat.clone().lu();
    let d = lu
        .solve(&rhs)
        .ok_or_else(|| CoreError::Numeric("singular flow system in occupancy".into()))?;
    let residual = (&mat * &d - &rhs).abs().max();
    if residual > tol {
        return Err(CoreError::Numeric(format!("flow solve residual {residual} > {tol}")));
    }
    let mut rho = vec![0.0; n * mdp.n_actions];
    for s in 0..n {
        let ds = d[s].max(0.0);
        for a in 0..mdp.n_actions {
            rho[s * mdp.n_actions + a] = ds * policy.prob(s, a);
        }
    }
    // Renormalize away the last-ulp drift so the distribution invariant is exact.
    let sum: f64 = rho.iter().sum();
    if (sum - 1.0).abs() > 1e-8 {
        return Err(CoreError::Numeric(format!("occupancy mass {sum} far from 1")));
    }
    for x in &mut rho {
        *x /= sum;
    }
    OccupancyMeasure::from_table(n, mdp.n_actions, rho)
}

/// Power-iteration occupancy, used as the cross-check of the linear solve.
pub fn occupancy_power_iteration(
    mdp: &TabularMdp,
    policy: &StochasticPolicy,
    tol: f64,
) -> Result<OccupancyMeasure> {
    if !policy.matches(mdp) {
        return Err(CoreError::InvalidInput("policy shape does not match MDP".into()));
    }
    let n = mdp.n_states;
    let mut d: Vec<f64> = mdp.init_dist().iter().map(|m| (1.0 - mdp.gamma) * m).collect();
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; n];
        for (s, x) in next.iter_mut().enumerate() {
            *x = (1.0 - mdp.gamma) * mdp.init_dist()[s];
        }
        for s in 0..n {
            for a in 0..mdp.n_actions {
                let w = mdp.gamma * d[s] * policy.prob(s, a);
                if w == 0.0 {
                    continue;
                }
                let row = mdp.transition_row(s, a);
                for s2 in 0..n {
                    next[s2] += w * row[s2];
                }
            }
        }
        let delta = d
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        d = next;
        if delta < tol {
            break;
        }
    }
    let mut rho = vec![0.0; n * mdp.n_actions];
    for s in 0..n {
        for a in 0..mdp.n_actions {
            rho[s * mdp.n_actions + a] = d[s] * policy.prob(s, a);
        }
    }
    let sum: f64 = rho.iter().sum();
    for x in &mut rho {
        *x /= sum;
    }
    OccupancyMeasure::from_table(n, mdp.n_actions, rho)
}

/// Exact expected discounted return of `policy`, computed two algebraically
/// independent ways (occupancy contraction and mu0' V) which must agree.
pub fn evaluate_return(mdp: &TabularMdp, policy: &StochasticPolicy) -> Result<f64> {
    let rho = occupancy(mdp, policy, 1e-10)?;
    let mut via_rho = 0.0;
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            via_rho += rho.get(s, a) * mdp.r(s, a);
        }
    }
    via_rho /= 1.0 - mdp.gamma;
    let v = policy_evaluation(mdp, policy)?;
    let via_v: f64 = mdp.init_dist().iter().zip(&v).map(|(m, v)| m * v).sum();
    if (via_rho - via_v).abs() > 1e-8 * (1.0 + via_v.abs()) {
        return Err(CoreError::Numeric(format!(
            "return mismatch: occupancy route {via_rho} vs evaluation route {via_v}"
        )));
    }
    Ok(via_v)
}
