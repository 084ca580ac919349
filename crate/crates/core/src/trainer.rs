//! Adversarial training loops: the PU-discriminator methods, their plain
//! baselines and behavioral cloning, all driving a tabular softmax policy
//! with a REINFORCE-with-baseline update.

use rand::Rng;

use crate::demos::DemoSet;
use crate::error::{CoreError, Result};
use crate::fdiv::{clamp_unit, sigmoid};
use crate::mdp::{evaluate_return, SoftmaxPolicy, TabularMdp, Trajectory};
use crate::scorer::{
    interpolate_batch, lipschitz_penalty_and_grad, Architecture, FeatureMap, PenaltyPoints,
    ScorerParams, StepDirection,
};
use crate::sim::{derive_seed, rng_from_seed, sample_discounted_from_rollouts, sample_trajectories};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    UidGail,
    Gail,
    UidWail,
    Wail,
    PuGail,
    Bc,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::UidGail => "uid_gail",
            Method::Gail => "gail",
            Method::UidWail => "uid_wail",
            Method::Wail => "wail",
            Method::PuGail => "pu_gail",
            Method::Bc => "bc",
        }
    }

    pub fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "uid_gail" => Method::UidGail,
            "gail" => Method::Gail,
            "uid_wail" => Method::UidWail,
            "wail" => Method::Wail,
            "pu_gail" => Method::PuGail,
            "bc" => Method::Bc,
            other => return Err(CoreError::InvalidInput(format!("unknown method '{other}'"))),
        })
    }

    pub fn uses_discriminator(&self) -> bool {
        !matches!(self, Method::Bc)
    }

    /// Critic methods score with a raw reward; the others with a sigmoid
    /// discriminator.
    pub fn is_critic(&self) -> bool {
        matches!(self, Method::UidWail | Method::Wail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerKind {
    Tabular,
    Mlp { hidden_dim: usize },
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub method: Method,
    pub alpha: f64,
    pub lambda_gp: f64,
    pub iters: usize,
    pub disc_steps_per_iter: usize,
    pub policy_steps_per_iter: usize,
    pub batch_size: usize,
    pub lr_disc: f64,
    pub lr_policy: f64,
    /// Both learning rates are scaled by 1/(1 + lr_decay * iter).
    pub lr_decay: f64,
    pub rollout_per_iter: usize,
    pub horizon: usize,
    pub seed: u64,
    pub entropy_bonus: f64,
    pub scorer_kind: ScorerKind,
    pub penalty_points: PenaltyPoints,
}

impl TrainConfig {
    pub fn defaults(method: Method, seed: u64) -> Self {
        Self {
            method,
            alpha: 0.7,
            lambda_gp: 10.0,
            iters: 300,
            disc_steps_per_iter: 1,
            policy_steps_per_iter: 3,
            batch_size: 128,
            lr_disc: 1.0,
            lr_policy: 2.0,
            lr_decay: 0.0,
            rollout_per_iter: 16,
            horizon: 100,
            seed,
            entropy_bonus: 0.01,
            scorer_kind: ScorerKind::Tabular,
            penalty_points: PenaltyPoints::Interpolated,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(CoreError::InvalidInput(format!("alpha {} outside (0,1]", self.alpha)));
        }
        if self.lambda_gp < 0.0 || self.entropy_bonus < 0.0 {
            return Err(CoreError::InvalidInput("lambda_gp and entropy_bonus must be >= 0".into()));
        }
        for (name, v) in [
            ("disc_steps_per_iter", self.disc_steps_per_iter),
            ("policy_steps_per_iter", self.policy_steps_per_iter),
            ("batch_size", self.batch_size),
            ("rollout_per_iter", self.rollout_per_iter),
            ("horizon", self.horizon),
        ] {
            if v == 0 {
                return Err(CoreError::InvalidInput(format!("{name} must be positive")));
            }
        }
        // lr_disc = 0 freezes the discriminator (useful for diagnostics).
        if self.lr_disc < 0.0 || self.lr_policy <= 0.0 {
            return Err(CoreError::InvalidInput("learning rates must be positive".into()));
        }
        if self.lr_decay < 0.0 {
            return Err(CoreError::InvalidInput("lr_decay must be >= 0".into()));
        }
        Ok(())
    }
}

/// Per-iteration diagnostics; discriminator fields are None for BC.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub agent_return: f64,
    pub disc_loss: Option<f64>,
    pub clamp_active_frac: Option<f64>,
    pub acc_do: Option<f64>,
    pub acc_dn: Option<f64>,
    pub entropy: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub iterations: Vec<IterationRecord>,
    pub final_policy: SoftmaxPolicy,
    pub final_scorer: Option<ScorerParams>,
}

impl RunRecord {
    pub fn final_return(&self) -> f64 {
        self.iterations.last().map(|r| r.agent_return).unwrap_or(f64::NAN)
    }
}

/// One REINFORCE ascent step with a per-state mean baseline over the batch.
/// The rollouts must come from `policy` itself (on-policy contract).
pub fn policy_gradient_step(
    policy: &SoftmaxPolicy,
    rollouts: &[Trajectory],
    reward_fn: &dyn Fn(usize, usize) -> f64,
    lr: f64,
    entropy_bonus: f64,
    gamma: f64,
) -> Result<SoftmaxPolicy> {
    if rollouts.is_empty() {
        return Err(CoreError::InvalidInput("empty rollouts".into()));
    }
    let grad = policy_gradient(policy, rollouts, reward_fn, entropy_bonus, gamma)?;
    let logits = policy.logits.iter().zip(&grad).map(|(w, g)| w + lr * g).collect();
    Ok(SoftmaxPolicy { n_states: policy.n_states, n_actions: policy.n_actions, logits })
}

/// Gradient of the REINFORCE surrogate
/// mean over trajectories of sum_t gamma^t A_t log pi(a_t|s_t)
/// plus entropy_bonus * mean over states of H(pi(.|s)).
pub fn policy_gradient(
    policy: &SoftmaxPolicy,
    rollouts: &[Trajectory],
    reward_fn: &dyn Fn(usize, usize) -> f64,
    entropy_bonus: f64,
    gamma: f64,
) -> Result<Vec<f64>> {
    let probs = policy.probs();
    let na = policy.n_actions;
    // Discounted reward-to-go per step, then a per-state mean baseline.
    let mut returns: Vec<Vec<f64>> = Vec::with_capacity(rollouts.len());
    let mut state_sum = vec![0.0; policy.n_states];
    let mut state_count = vec![0usize; policy.n_states];
    for traj in rollouts {
        let mut g = vec![0.0; traj.steps.len()];
        let mut acc = 0.0;
        for (t, step) in traj.steps.iter().enumerate().rev() {
            acc = reward_fn(step.state, step.action) + gamma * acc;
            g[t] = acc;
        }
        for (step, &gt) in traj.steps.iter().zip(&g) {
            state_sum[step.state] += gt;
            state_count[step.state] += 1;
        }
        returns.push(g);
    }
    let baseline: Vec<f64> = state_sum
        .iter()
        .zip(&state_count)
        .map(|(s, c)| if *c > 0 { s / *c as f64 } else { 0.0 })
        .collect();

    let mut grad = vec![0.0; policy.logits.len()];
    let n_traj = rollouts.len() as f64;
    for (traj, g) in rollouts.iter().zip(&returns) {
        for (t, step) in traj.steps.iter().enumerate() {
            let adv = g[t] - baseline[step.state];
            let coeff = gamma.powi(t as i32) * adv / n_traj;
            if coeff == 0.0 {
                continue;
            }
            let row = probs.action_row(step.state);
            for b in 0..na {
                let indicator = if b == step.action { 1.0 } else { 0.0 };
                grad[step.state * na + b] += coeff * (indicator - row[b]);
            }
        }
    }
    if entropy_bonus > 0.0 {
        let inv_ns = 1.0 / policy.n_states as f64;
        for s in 0..policy.n_states {
            let row = probs.action_row(s);
            let h: f64 = row.iter().filter(|p| **p > 0.0).map(|p| -p * p.ln()).sum();
            for b in 0..na {
                let p = row[b];
                if p > 0.0 {
                    grad[s * na + b] += entropy_bonus * inv_ns * (-p * (p.ln() + h));
                }
            }
        }
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(CoreError::Numeric("non-finite policy gradient".into()));
    }
    Ok(grad)
}

/// Batch objective value and its gradient in the concatenated
/// [expert; agent] score vector, for one discriminator method.
pub fn disc_loss_and_score_grad(
    method: Method,
    alpha: f64,
    scores_expert: &[f64],
    scores_agent: &[f64],
) -> Result<(f64, Vec<f64>, bool)> {
    let ne = scores_expert.len() as f64;
    let na = scores_agent.len() as f64;
    if ne == 0.0 || na == 0.0 {
        return Err(CoreError::InvalidInput("batches must be non-empty".into()));
    }
    let mut d_expert = vec![0.0; scores_expert.len()];
    let mut d_agent = vec![0.0; scores_agent.len()];
    let (loss, clamp_active);
    match method {
        Method::UidGail | Method::Gail | Method::PuGail => {
            let de: Vec<f64> = scores_expert.iter().map(|g| clamp_unit(sigmoid(*g))).collect();
            let da: Vec<f64> = scores_agent.iter().map(|g| clamp_unit(sigmoid(*g))).collect();
            let log_de = de.iter().map(|d| d.ln()).sum::<f64>() / ne;
            let log_da = da.iter().map(|d| d.ln()).sum::<f64>() / na;
            let log_1m_de = de.iter().map(|d| (1.0 - d).ln()).sum::<f64>() / ne;
            let log_1m_da = da.iter().map(|d| (1.0 - d).ln()).sum::<f64>() / na;
            match method {
                Method::UidGail => {
                    let inner = log_de - alpha * log_da;
                    clamp_active = inner >= 0.0;
                    loss = inner.min(0.0) + alpha * log_1m_da;
                    for (i, d) in da.iter().enumerate() {
                        d_agent[i] = -alpha / na * d;
                        if !clamp_active {
                            d_agent[i] += -alpha / na * (1.0 - d);
                        }
                    }
                    if !clamp_active {
                        for (i, d) in de.iter().enumerate() {
                            d_expert[i] = (1.0 - d) / ne;
                        }
                    }
                }
                Method::Gail => {
                    clamp_active = false;
                    loss = log_de + log_1m_da;
                    for (i, d) in de.iter().enumerate() {
                        d_expert[i] = (1.0 - d) / ne;
                    }
                    for (i, d) in da.iter().enumerate() {
                        d_agent[i] = -d / na;
                    }
                }
                Method::PuGail => {
                    // Roles swapped: agent is unlabeled, expert is positive.
                    let inner = log_1m_da - alpha * log_1m_de;
                    clamp_active = inner >= 0.0;
                    loss = inner.min(0.0) + alpha * log_de;
                    for (i, d) in de.iter().enumerate() {
                        d_expert[i] = alpha / ne * (1.0 - d);
                        if !clamp_active {
                            d_expert[i] += alpha / ne * d;
                        }
                    }
                    if !clamp_active {
                        for (i, d) in da.iter().enumerate() {
                            d_agent[i] = -d / na;
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        Method::UidWail => {
            let r_e = scores_expert.iter().sum::<f64>() / ne;
            let r_a = scores_agent.iter().sum::<f64>() / na;
            let inner = r_e - alpha * r_a;
            clamp_active = inner >= 0.0;
            loss = inner.min(0.0) - alpha * r_a;
            for g in d_agent.iter_mut() {
                *g = -alpha / na;
                if !clamp_active {
                    *g += -alpha / na;
                }
            }
            if !clamp_active {
                for g in d_expert.iter_mut() {
                    *g = 1.0 / ne;
                }
            }
        }
        Method::Wail => {
            let r_e = scores_expert.iter().sum::<f64>() / ne;
            let r_a = scores_agent.iter().sum::<f64>() / na;
            clamp_active = false;
            loss = r_e - r_a;
            for g in d_expert.iter_mut() {
                *g = 1.0 / ne;
            }
            for g in d_agent.iter_mut() {
                *g = -1.0 / na;
            }
        }
        Method::Bc => {
            return Err(CoreError::InvalidInput("bc has no discriminator".into()));
        }
    }
    let mut dscores = d_expert;
    dscores.extend(d_agent);
    Ok((loss, dscores, clamp_active))
}

/// One ascent step on the method's discriminator/critic objective.
/// Returns the updated scorer, the objective value (including the penalty
/// term for WAIL-family methods) and whether the min{0,.} branch engaged.
pub fn discriminator_step(
    scorer: &ScorerParams,
    expert_batch: &[(usize, usize)],
    agent_batch: &[(usize, usize)],
    cfg: &TrainConfig,
    penalty_seed: u64,
) -> Result<(ScorerParams, f64, bool)> {
    let mut all: Vec<(usize, usize)> = expert_batch.to_vec();
    all.extend_from_slice(agent_batch);
    let ne = expert_batch.len();
    let mut clamp_flag = false;
    let mut loss_out = 0.0;
    let grad_res = scorer.loss_grad(&all, |scores| {
        let (loss, dscores, clamp) =
            disc_loss_and_score_grad(cfg.method, cfg.alpha, &scores[..ne], &scores[ne..])
                .expect("non-empty batches");
        clamp_flag = clamp;
        loss_out = loss;
        (loss, dscores)
    })?;
    let mut grad = grad_res.param_grad;
    let mut loss = loss_out;
    if cfg.method.is_critic() && cfg.lambda_gp > 0.0 {
        let points = interpolate_batch(
            &scorer.feature_map,
            expert_batch,
            agent_batch,
            penalty_seed,
            cfg.penalty_points,
        )?;
        let (psi, psi_grad) = lipschitz_penalty_and_grad(scorer, &points)?;
        loss += cfg.lambda_gp * psi;
        for (g, p) in grad.iter_mut().zip(&psi_grad) {
            *g += cfg.lambda_gp * p;
        }
    }
    if !loss.is_finite() {
        return Err(CoreError::Numeric("non-finite discriminator loss".into()));
    }
    let updated = if cfg.lr_disc > 0.0 {
        scorer.sgd_step(&grad, cfg.lr_disc, StepDirection::Ascent)?
    } else {
        scorer.clone()
    };
    Ok((updated, loss, clamp_flag))
}

/// Classification accuracy on the hidden provenance split of the demo set.
/// Evaluation-only: this is the one trainer entry point that reads labels.
pub fn disc_accuracy(scorer: &ScorerParams, demos: &DemoSet, method: Method) -> Result<(f64, f64)> {
    let scores = scorer.score(demos.transitions())?;
    let positive: Vec<bool> = if method.is_critic() {
        // Critic threshold: median score over all demonstrations.
        let mut sorted = scores.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        scores.iter().map(|r| *r > median).collect()
    } else {
        scores.iter().map(|g| sigmoid(*g) > 0.5).collect()
    };
    let mut hit_o = 0usize;
    let mut n_o = 0usize;
    let mut hit_n = 0usize;
    let mut n_n = 0usize;
    for (tag, pos) in demos.provenance().iter().zip(&positive) {
        if tag.is_optimal {
            n_o += 1;
            if *pos {
                hit_o += 1;
            }
        } else {
            n_n += 1;
            if !*pos {
                hit_n += 1;
            }
        }
    }
    let acc_do = if n_o > 0 { hit_o as f64 / n_o as f64 } else { 0.0 };
    let acc_dn = if n_n > 0 { hit_n as f64 / n_n as f64 } else { 0.0 };
    Ok((acc_do, acc_dn))
}

fn sample_demo_batch(
    demos: &DemoSet,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Vec<(usize, usize)> {
    let n = demos.len();
    (0..batch_size).map(|_| demos.transitions()[rng.gen_range(0..n)]).collect()
}

fn reward_fn_for(method: Method, scorer: ScorerParams) -> impl Fn(usize, usize) -> f64 {
    move |s, a| {
        let g = scorer.score_one(s, a).unwrap_or(0.0);
        if method.is_critic() {
            g
        } else {
            -(1.0 - clamp_unit(sigmoid(g))).ln()
        }
    }
}

/// Full training run. Deterministic given cfg.seed.
pub fn train(mdp: &TabularMdp, demos: &DemoSet, cfg: &TrainConfig) -> Result<RunRecord> {
    cfg.validate()?;
    if demos.len() == 0 {
        return Err(CoreError::InvalidInput("empty demo set".into()));
    }
    let mut policy = SoftmaxPolicy::zeros(mdp.n_states, mdp.n_actions);
    let feature_map = FeatureMap::OneHot { n_states: mdp.n_states, n_actions: mdp.n_actions };
    let arch = match cfg.scorer_kind {
        ScorerKind::Tabular => {
            Architecture::Tabular { n_states: mdp.n_states, n_actions: mdp.n_actions }
        }
        ScorerKind::Mlp { hidden_dim } => {
            Architecture::Mlp { feature_dim: feature_map.dim(), hidden_dim }
        }
    };
    let mut scorer = if cfg.method.uses_discriminator() {
        Some(ScorerParams::init(arch, feature_map, derive_seed(cfg.seed, 0))?)
    } else {
        None
    };
    let mut batch_rng = rng_from_seed(derive_seed(cfg.seed, 1));
    // Monotone counter tying rollout buffers to the policy that produced them.
    let mut policy_version = 0u64;
    let mut iterations = Vec::with_capacity(cfg.iters);

    for iter in 0..cfg.iters {
        let decay = 1.0 / (1.0 + cfg.lr_decay * iter as f64);
        let mut iter_cfg = cfg.clone();
        iter_cfg.lr_disc = cfg.lr_disc * decay;
        iter_cfg.lr_policy = cfg.lr_policy * decay;
        let cfg = &iter_cfg;
        let pi = policy.probs();
        let agent_return = evaluate_return(mdp, &pi)?;
        let mut disc_loss = None;
        let mut clamp_frac = None;
        let mut acc = (None, None);

        match cfg.method {
            Method::Bc => {
                // Full-batch log-likelihood ascent on the demonstrations.
                for _ in 0..cfg.policy_steps_per_iter {
                    policy = bc_step(&policy, demos.transitions(), cfg.lr_policy)?;
                    policy_version += 1;
                }
            }
            _ => {
                let sc = scorer.as_mut().expect("discriminator method");
                let rollout_seed = derive_seed(cfg.seed, 1000 + iter as u64);
                let rollouts =
                    sample_trajectories(mdp, &pi, cfg.rollout_per_iter, cfg.horizon, rollout_seed)?;
                let rollout_version = policy_version;
                let mut clamped = 0usize;
                for d in 0..cfg.disc_steps_per_iter {
                    debug_assert_eq!(rollout_version, policy_version);
                    let expert_batch = sample_demo_batch(demos, cfg.batch_size, &mut batch_rng);
                    let agent_batch = sample_discounted_from_rollouts(
                        &rollouts,
                        mdp.gamma,
                        cfg.batch_size,
                        &mut batch_rng,
                    )?;
                    let penalty_seed = derive_seed(cfg.seed, 2_000_000 + (iter * 1000 + d) as u64);
                    let (updated, loss, clamp) =
                        discriminator_step(sc, &expert_batch, &agent_batch, cfg, penalty_seed)?;
                    *sc = updated;
                    disc_loss = Some(loss);
                    if clamp {
                        clamped += 1;
                    }
                }
                clamp_frac = Some(clamped as f64 / cfg.disc_steps_per_iter as f64);
                let (a_o, a_n) = disc_accuracy(sc, demos, cfg.method)?;
                acc = (Some(a_o), Some(a_n));

                let reward = reward_fn_for(cfg.method, sc.clone());
                for p in 0..cfg.policy_steps_per_iter {
                    // Fresh on-policy rollouts for every policy update.
                    let seed = derive_seed(cfg.seed, 3_000_000 + (iter * 1000 + p) as u64);
                    let pi_now = policy.probs();
                    let fresh =
                        sample_trajectories(mdp, &pi_now, cfg.rollout_per_iter, cfg.horizon, seed)?;
                    let fresh_version = policy_version;
                    debug_assert_eq!(fresh_version, policy_version);
                    policy = policy_gradient_step(
                        &policy,
                        &fresh,
                        &reward,
                        cfg.lr_policy,
                        cfg.entropy_bonus,
                        mdp.gamma,
                    )?;
                    policy_version += 1;
                }
            }
        }

        iterations.push(IterationRecord {
            iter,
            agent_return,
            disc_loss,
            clamp_active_frac: clamp_frac,
            acc_do: acc.0,
            acc_dn: acc.1,
            entropy: policy.mean_entropy(),
        });
    }

    Ok(RunRecord { iterations, final_policy: policy, final_scorer: scorer })
}

/// One full-batch behavioral-cloning ascent step on the demo log-likelihood.
pub fn bc_step(
    policy: &SoftmaxPolicy,
    transitions: &[(usize, usize)],
    lr: f64,
) -> Result<SoftmaxPolicy> {
    if transitions.is_empty() {
        return Err(CoreError::InvalidInput("empty demo set".into()));
    }
    let probs = policy.probs();
    let na = policy.n_actions;
    let mut grad = vec![0.0; policy.logits.len()];
    let n = transitions.len() as f64;
    for &(s, a) in transitions {
        let row = probs.action_row(s);
        for b in 0..na {
            let indicator = if b == a { 1.0 } else { 0.0 };
            grad[s * na + b] += (indicator - row[b]) / n;
        }
    }
    let logits = policy.logits.iter().zip(&grad).map(|(w, g)| w + lr * g).collect();
    Ok(SoftmaxPolicy { n_states: policy.n_states, n_actions: policy.n_actions, logits })
}

/// Line-delimited run record serialization:
/// header, then one line per iteration with the fixed field order
/// iter return disc_loss clamp_active_frac acc_do acc_dn entropy.
/// Missing discriminator fields (BC) serialize as "-".
pub fn run_record_to_text(method: Method, seed: u64, iterations: &[IterationRecord]) -> String {
    let mut out = format!("runrecord v1 {} {}\n", method.as_str(), seed);
    let field = |v: Option<f64>| match v {
        Some(x) => format!("{x}"),
        None => "-".to_string(),
    };
    for r in iterations {
        out.push_str(&format!(
            "{} {} {} {} {} {} {}\n",
            r.iter,
            r.agent_return,
            field(r.disc_loss),
            field(r.clamp_active_frac),
            field(r.acc_do),
            field(r.acc_dn),
            r.entropy
        ));
    }
    out
}

/// Parses a run record file; returns the method name, seed and iterations.
pub fn run_record_from_text(text: &str) -> Result<(String, u64, Vec<IterationRecord>)> {
    let mut lines = text.lines().enumerate();
    let (_, header) =
        lines.next().ok_or(CoreError::Parse { line: 0, msg: "empty run record".into() })?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "runrecord" || toks[1] != "v1" {
        return Err(CoreError::Parse { line: 1, msg: "bad run record header".into() });
    }
    let method = toks[2].to_string();
    let seed: u64 = toks[3]
        .parse()
        .map_err(|_| CoreError::Parse { line: 1, msg: "bad seed".into() })?;
    let mut iterations = Vec::new();
    for (ln, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 7 {
            return Err(CoreError::Parse { line: ln + 1, msg: "expected 7 fields".into() });
        }
        let num = |t: &str| -> Result<f64> {
            t.parse().map_err(|_| CoreError::Parse { line: ln + 1, msg: format!("bad number '{t}'") })
        };
        let opt = |t: &str| -> Result<Option<f64>> {
            if t == "-" { Ok(None) } else { num(t).map(Some) }
        };
        iterations.push(IterationRecord {
            iter: toks[0]
                .parse()
                .map_err(|_| CoreError::Parse { line: ln + 1, msg: "bad iter".into() })?,
            agent_return: num(toks[1])?,
            disc_loss: opt(toks[2])?,
            clamp_active_frac: opt(toks[3])?,
            acc_do: opt(toks[4])?,
            acc_dn: opt(toks[5])?,
            entropy: num(toks[6])?,
        });
    }
    Ok((method, seed, iterations))
}
