//! Positive-unlabeled risk estimators and the adversarial objectives built
//! from them.
//!
//! Sign conventions: `pu_risk` is the risk-minimization form with the
//! non-negative correction max{0, .}; the discriminator/critic losses are the
//! maximization forms where the same clamp appears as min{0, .}. Maximizing
//! the JS discriminator loss equals minimizing `pu_risk` with the logistic
//! margin loss and g = logit(D), exactly.

use crate::error::{CoreError, Result};
use crate::fdiv::{clamp_unit, FDivSpec};
use crate::scorer::{interpolate_batch, lipschitz_penalty_and_grad, PenaltyPoints, ScorerParams};

/// Margin loss phi for the PU risk; phi(g) scores the positive label,
/// phi(-g) the negative one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MarginLoss {
    #[default]
    Logistic,
}

impl MarginLoss {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            // log(1 + exp(-z)), stable for both signs.
            MarginLoss::Logistic => {
                if z > 0.0 {
                    (-z).exp().ln_1p()
                } else {
                    -z + z.exp().ln_1p()
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClampMode {
    #[default]
    NonNegativeCorrection,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossSide {
    #[default]
    MinimizeRisk,
    MaximizeDiscriminator,
}

#[derive(Debug, Clone, Copy)]
pub struct PuLossConfig {
    pub alpha: f64,
    pub clamp: ClampMode,
    pub loss_side_convention: LossSide,
}

impl PuLossConfig {
    pub fn new(alpha: f64, clamp: ClampMode, loss_side_convention: LossSide) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(CoreError::InvalidInput(format!("alpha {alpha} outside (0,1]")));
        }
        Ok(Self { alpha, clamp, loss_side_convention })
    }
}

/// Expert-side and agent-side sample batches for one objective evaluation.
#[derive(Debug, Clone)]
pub struct BatchPair {
    pub expert_batch: Vec<(usize, usize)>,
    pub agent_batch: Vec<(usize, usize)>,
}

impl BatchPair {
    pub fn new(expert_batch: Vec<(usize, usize)>, agent_batch: Vec<(usize, usize)>) -> Result<Self> {
        if expert_batch.is_empty() || agent_batch.is_empty() {
            return Err(CoreError::InvalidInput("batches must be non-empty".into()));
        }
        Ok(Self { expert_batch, agent_batch })
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(CoreError::Numeric(format!("non-finite value in {what}")));
    }
    Ok(())
}

/// PU risk estimator:
/// T{0, E_e[phi(g)] - alpha E_a[phi(g)]} + alpha E_a[phi(-g)].
pub fn pu_risk(
    scorer_outputs_expert: &[f64],
    scorer_outputs_agent: &[f64],
    phi: MarginLoss,
    cfg: &PuLossConfig,
) -> Result<f64> {
    if scorer_outputs_expert.is_empty() || scorer_outputs_agent.is_empty() {
        return Err(CoreError::InvalidInput("batches must be non-empty".into()));
    }
    check_finite(scorer_outputs_expert, "expert scorer outputs")?;
    check_finite(scorer_outputs_agent, "agent scorer outputs")?;
    let pos_e = mean(&scorer_outputs_expert.iter().map(|g| phi.eval(*g)).collect::<Vec<_>>());
    let pos_a = mean(&scorer_outputs_agent.iter().map(|g| phi.eval(*g)).collect::<Vec<_>>());
    let neg_a = mean(&scorer_outputs_agent.iter().map(|g| phi.eval(-*g)).collect::<Vec<_>>());
    let corrected = pos_e - cfg.alpha * pos_a;
    let first = match cfg.clamp {
        ClampMode::NonNegativeCorrection => corrected.max(0.0),
        ClampMode::None => corrected,
    };
    Ok(first + cfg.alpha * neg_a)
}

/// JS-instantiated discriminator objective (maximization form):
/// min{0, E_e[log D] - alpha E_a[log D]} + alpha E_a[log(1-D)].
pub fn uid_discriminator_loss_js(d_expert: &[f64], d_agent: &[f64], alpha: f64) -> Result<f64> {
    if d_expert.is_empty() || d_agent.is_empty() {
        return Err(CoreError::InvalidInput("batches must be non-empty".into()));
    }
    check_finite(d_expert, "expert discriminator outputs")?;
    check_finite(d_agent, "agent discriminator outputs")?;
    let log_d_e = mean(&d_expert.iter().map(|d| clamp_unit(*d).ln()).collect::<Vec<_>>());
    let log_d_a = mean(&d_agent.iter().map(|d| clamp_unit(*d).ln()).collect::<Vec<_>>());
    let log_1md_a = mean(&d_agent.iter().map(|d| (1.0 - clamp_unit(*d)).ln()).collect::<Vec<_>>());
    Ok((log_d_e - alpha * log_d_a).min(0.0) + alpha * log_1md_a)
}

/// TV-instantiated critic objective (maximization form):
/// min{0, E_e[r] - alpha E_a[r]} - alpha E_a[r] + penalty.
/// The caller supplies the already-weighted penalty term lambda * Psi.
pub fn uid_critic_loss_tv(
    r_expert: &[f64],
    r_agent: &[f64],
    alpha: f64,
    penalty: f64,
) -> Result<f64> {
    if r_expert.is_empty() || r_agent.is_empty() {
        return Err(CoreError::InvalidInput("batches must be non-empty".into()));
    }
    check_finite(r_expert, "expert critic outputs")?;
    check_finite(r_agent, "agent critic outputs")?;
    if !penalty.is_finite() {
        return Err(CoreError::Numeric("non-finite penalty".into()));
    }
    let r_e = mean(r_expert);
    let r_a = mean(r_agent);
    Ok((r_e - alpha * r_a).min(0.0) - alpha * r_a + penalty)
}

/// Psi(r) = -E[(||grad r(x_hat)||_2 - 1)^2] over interpolated feature points.
pub fn lipschitz_penalty(
    scorer: &ScorerParams,
    expert_batch: &[(usize, usize)],
    agent_batch: &[(usize, usize)],
    seed: u64,
) -> Result<f64> {
    let points = interpolate_batch(
        &scorer.feature_map,
        expert_batch,
        agent_batch,
        seed,
        PenaltyPoints::Interpolated,
    )?;
    let (psi, _) = lipschitz_penalty_and_grad(scorer, &points)?;
    Ok(psi)
}

/// Variational objective of the f-divergence form:
/// min{0, E_e[T] - alpha E_a[T]} - alpha E_a[f*(T)].
pub fn variational_objective(
    t_expert: &[f64],
    t_agent: &[f64],
    fspec: &FDivSpec,
    alpha: f64,
) -> Result<f64> {
    if t_expert.is_empty() || t_agent.is_empty() {
        return Err(CoreError::InvalidInput("batches must be non-empty".into()));
    }
    for &t in t_expert.iter().chain(t_agent) {
        fspec.check_domain(t)?;
    }
    let t_e = mean(t_expert);
    let t_a = mean(t_agent);
    let conj_a = mean(&t_agent.iter().map(|t| (fspec.conjugate)(*t)).collect::<Vec<_>>());
    Ok((t_e - alpha * t_a).min(0.0) - alpha * conj_a)
}
