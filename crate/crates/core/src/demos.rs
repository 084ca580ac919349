//! Imperfect demonstration generation: mixing optimal and non-optimal
//! sources under the checkpoint (D1) and action-noise (D2) protocols.

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::mdp::{evaluate_return, OccupancyMeasure, SoftmaxPolicy, StochasticPolicy, TabularMdp};
use crate::sim::{derive_seed, rng_from_seed, sample_occupancy_transitions, sample_trajectories};
use crate::trainer::policy_gradient_step;

/// Source tag for one transition. Hidden from learners; only evaluation
/// code may read it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub source_index: usize,
    pub is_optimal: bool,
}

/// Bag of (state, action) transitions with hidden provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    transitions: Vec<(usize, usize)>,
    provenance: Vec<Provenance>,
    pub ratio_optimal: f64,
}

impl DemoSet {
    pub fn new(
        transitions: Vec<(usize, usize)>,
        provenance: Vec<Provenance>,
        ratio_optimal: f64,
    ) -> Result<Self> {
        if transitions.len() != provenance.len() {
            return Err(CoreError::InvalidInput("transitions/provenance length mismatch".into()));
        }
        if transitions.is_empty() {
            return Err(CoreError::InvalidInput("empty demo set".into()));
        }
        let n = transitions.len() as f64;
        let count = provenance.iter().filter(|p| p.is_optimal).count() as f64;
        if (ratio_optimal - count / n).abs() > 1.0 / n {
            return Err(CoreError::InvalidInput(format!(
                "ratio_optimal {ratio_optimal} inconsistent with labels ({count}/{n})"
            )));
        }
        Ok(Self { transitions, provenance, ratio_optimal })
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    /// Learner-facing view: transitions only.
    pub fn transitions(&self) -> &[(usize, usize)] {
        &self.transitions
    }

    /// Evaluation-only view of the hidden source labels.
    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    /// Line-oriented text serialization; exact round trip.
    pub fn to_text(&self) -> String {
        let mut out = format!("demoset v1 {} {}\n", self.len(), self.ratio_optimal);
        for (t, p) in self.transitions.iter().zip(&self.provenance) {
            out.push_str(&format!("{} {} {} {}\n", t.0, t.1, p.source_index, u8::from(p.is_optimal)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) =
            lines.next().ok_or(CoreError::Parse { line: 0, msg: "empty demo file".into() })?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "demoset" || toks[1] != "v1" {
            return Err(CoreError::Parse { line: 1, msg: "bad demoset header".into() });
        }
        let n: usize =
            toks[2].parse().map_err(|_| CoreError::Parse { line: 1, msg: "bad count".into() })?;
        let ratio: f64 =
            toks[3].parse().map_err(|_| CoreError::Parse { line: 1, msg: "bad ratio".into() })?;
        let mut transitions = Vec::with_capacity(n);
        let mut provenance = Vec::with_capacity(n);
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 4 {
                return Err(CoreError::Parse { line: ln + 1, msg: "expected 4 fields".into() });
            }
            let parse = |t: &str| -> Result<usize> {
                t.parse()
                    .map_err(|_| CoreError::Parse { line: ln + 1, msg: format!("bad field '{t}'") })
            };
            transitions.push((parse(toks[0])?, parse(toks[1])?));
            provenance.push(Provenance {
                source_index: parse(toks[2])?,
                is_optimal: parse(toks[3])? != 0,
            });
        }
        if transitions.len() != n {
            return Err(CoreError::Parse {
                line: 0,
                msg: format!("header says {n} transitions, found {}", transitions.len()),
            });
        }
        Self::new(transitions, provenance, ratio)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    /// D1: checkpoints of an RL training run at given progress fractions.
    Checkpoint,
    /// D2: uniform-mixing action noise at given weights.
    ActionNoise,
}

#[derive(Debug, Clone)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub levels: Vec<f64>,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(CoreError::InvalidInput("levels must be non-empty".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoreError::InvalidInput("levels must be strictly increasing".into()));
        }
        if levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
            return Err(CoreError::InvalidInput("levels must lie in [0,1]".into()));
        }
        Ok(Self { kind, levels })
    }
}

const D1_TOTAL_ITERS: usize = 400;
const D1_ROLLOUTS: usize = 48;
const D1_LR: f64 = 4.0;
const D1_ENTROPY: f64 = 0.005;
const D1_RETRIES: usize = 5;

/// D1 protocol: run a seeded softmax policy-gradient training against the
/// true reward and snapshot at the given progress fractions. Snapshot
/// returns must be non-decreasing; on violation the run is reseeded, up to
/// D1_RETRIES times.
pub fn make_d1_policies(
    mdp: &TabularMdp,
    levels: &[f64],
    seed: u64,
) -> Result<Vec<StochasticPolicy>> {
    if levels.is_empty() || levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(CoreError::InvalidInput("levels must be fractions in [0,1]".into()));
    }
    let horizon = (4.0 / (1.0 - mdp.gamma)).ceil() as usize;
    for attempt in 0..D1_RETRIES {
        let run_seed = derive_seed(seed, attempt as u64);
        let mut policy = SoftmaxPolicy::zeros(mdp.n_states, mdp.n_actions);
        let mut snapshots: Vec<(f64, StochasticPolicy)> = Vec::new();
        let snap_iters: Vec<usize> =
            levels.iter().map(|l| (l * D1_TOTAL_ITERS as f64).round() as usize).collect();
        for iter in 0..=D1_TOTAL_ITERS {
            for (li, &si) in snap_iters.iter().enumerate() {
                if si == iter {
                    snapshots.push((levels[li], policy.probs()));
                }
            }
            if iter == D1_TOTAL_ITERS {
                break;
            }
            let rollouts = sample_trajectories(
                mdp,
                &policy.probs(),
                D1_ROLLOUTS,
                horizon,
                derive_seed(run_seed, 10_000 + iter as u64),
            )?;
            let reward = |s: usize, a: usize| mdp.r(s, a);
            policy =
                policy_gradient_step(&policy, &rollouts, &reward, D1_LR, D1_ENTROPY, mdp.gamma)?;
        }
        snapshots.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let returns: Vec<f64> = snapshots
            .iter()
            .map(|(_, p)| evaluate_return(mdp, p))
            .collect::<Result<_>>()?;
        if returns.windows(2).all(|w| w[0] <= w[1]) {
            return Ok(snapshots.into_iter().map(|(_, p)| p).collect());
        }
    }
    Err(CoreError::DemoGeneration(format!(
        "checkpoint returns not monotone after {D1_RETRIES} reseeds"
    )))
}

/// D2 protocol adapted to discrete actions: pi_n = (1-eps) pi_o + eps uniform.
/// Returns must be non-increasing in eps on `mdp`.
pub fn make_d2_policies(
    mdp: &TabularMdp,
    optimal: &StochasticPolicy,
    levels: &[f64],
) -> Result<Vec<StochasticPolicy>> {
    if levels.is_empty() || levels.iter().any(|l| !(0.0..=1.0).contains(l)) {
        return Err(CoreError::InvalidInput("levels must lie in [0,1]".into()));
    }
    let policies: Vec<StochasticPolicy> =
        levels.iter().map(|&eps| optimal.mix_with_uniform(eps)).collect();
    let mut prev = f64::INFINITY;
    for (eps, p) in levels.iter().zip(&policies) {
        let ret = evaluate_return(mdp, p)?;
        if ret > prev + 1e-9 {
            return Err(CoreError::DemoGeneration(format!(
                "return increased at noise level {eps}: {ret} > {prev}"
            )));
        }
        prev = ret;
    }
    Ok(policies)
}

/// Sample `n_per_policy` occupancy-distributed transitions from the optimal
/// policy and from each non-optimal policy, tag provenance (source 0 is the
/// optimal policy) and shuffle deterministically.
pub fn build_demo_set(
    mdp: &TabularMdp,
    optimal: &StochasticPolicy,
    non_optimal: &[StochasticPolicy],
    n_per_policy: usize,
    horizon: usize,
    seed: u64,
) -> Result<DemoSet> {
    if n_per_policy == 0 {
        return Err(CoreError::InvalidInput("n_per_policy must be positive".into()));
    }
    let mut transitions = Vec::new();
    let mut provenance = Vec::new();
    let sources: Vec<(&StochasticPolicy, bool)> = std::iter::once((optimal, true))
        .chain(non_optimal.iter().map(|p| (p, false)))
        .collect();
    for (idx, (policy, is_optimal)) in sources.iter().enumerate() {
        let ts = sample_occupancy_transitions(
            mdp,
            policy,
            n_per_policy,
            horizon,
            derive_seed(seed, idx as u64),
        )?;
        for t in ts {
            transitions.push(t);
            provenance.push(Provenance { source_index: idx, is_optimal: *is_optimal });
        }
    }
    // Fisher-Yates keyed by the root seed.
    let mut rng = rng_from_seed(derive_seed(seed, 0xF00D));
    for i in (1..transitions.len()).rev() {
        let j = rng.gen_range(0..=i);
        transitions.swap(i, j);
        provenance.swap(i, j);
    }
    let ratio = 1.0 / (1.0 + non_optimal.len() as f64);
    DemoSet::new(transitions, provenance, ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DemoFilter {
    All,
    OptimalOnly,
    NonOptimalOnly,
}

/// Normalized empirical state-action histogram over the filtered subset.
pub fn empirical_occupancy(
    demos: &DemoSet,
    filter: DemoFilter,
    n_states: usize,
    n_actions: usize,
) -> Result<OccupancyMeasure> {
    let mut counts = vec![0.0; n_states * n_actions];
    let mut total = 0.0;
    for (&(s, a), p) in demos.transitions.iter().zip(&demos.provenance) {
        let keep = match filter {
            DemoFilter::All => true,
            DemoFilter::OptimalOnly => p.is_optimal,
            DemoFilter::NonOptimalOnly => !p.is_optimal,
        };
        if !keep {
            continue;
        }
        if s >= n_states || a >= n_actions {
            return Err(CoreError::InvalidInput(format!("transition ({s},{a}) out of range")));
        }
        counts[s * n_actions + a] += 1.0;
        total += 1.0;
    }
    if total == 0.0 {
        return Err(CoreError::InvalidInput("no transitions under the requested filter".into()));
    }
    for c in &mut counts {
        *c /= total;
    }
    OccupancyMeasure::from_table(n_states, n_actions, counts)
}
