//! Parametric discriminator/critic functions with exact analytic gradients.
//!
//! Two architectures: a tabular scorer (one weight per state-action pair,
//! evaluated bilinearly on one-hot features when a feature-space gradient is
//! needed) and a two-layer tanh perceptron over feature embeddings.

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::sim::rng_from_seed;

pub const INIT_SCALE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Architecture {
    Tabular { n_states: usize, n_actions: usize },
    Mlp { feature_dim: usize, hidden_dim: usize },
}

impl Architecture {
    pub fn param_count(&self) -> usize {
        match *self {
            Architecture::Tabular { n_states, n_actions } => n_states * n_actions,
            Architecture::Mlp { feature_dim, hidden_dim } => {
                hidden_dim * feature_dim + hidden_dim + hidden_dim + 1
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureMap {
    /// one-hot(state) concatenated with one-hot(action)
    OneHot { n_states: usize, n_actions: usize },
    /// normalized (x, y) grid coordinates concatenated with one-hot(action)
    GridCoords { width: usize, height: usize, n_actions: usize },
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        match *self {
            FeatureMap::OneHot { n_states, n_actions } => n_states + n_actions,
            FeatureMap::GridCoords { n_actions, .. } => 2 + n_actions,
        }
    }

    pub fn n_states(&self) -> usize {
        match *self {
            FeatureMap::OneHot { n_states, .. } => n_states,
            FeatureMap::GridCoords { width, height, .. } => width * height,
        }
    }

    pub fn n_actions(&self) -> usize {
        match *self {
            FeatureMap::OneHot { n_actions, .. } | FeatureMap::GridCoords { n_actions, .. } => {
                n_actions
            }
        }
    }

    pub fn embed(&self, state: usize, action: usize) -> Result<Vec<f64>> {
        if state >= self.n_states() || action >= self.n_actions() {
            return Err(CoreError::InvalidInput(format!(
                "state {state} or action {action} out of range"
            )));
        }
        let mut x = vec![0.0; self.dim()];
        match *self {
            FeatureMap::OneHot { n_states, .. } => {
                x[state] = 1.0;
                x[n_states + action] = 1.0;
            }
            FeatureMap::GridCoords { width, height, .. } => {
                x[0] = (state % width) as f64 / (width.max(2) - 1) as f64;
                x[1] = (state / width) as f64 / (height.max(2) - 1) as f64;
                x[2 + action] = 1.0;
            }
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScorerParams {
    pub arch: Architecture,
    pub feature_map: FeatureMap,
    pub weights: Vec<f64>,
}

/// Scores plus the gradient of a scalar loss in the scores.
#[derive(Debug, Clone)]
pub struct GradResult {
    pub values: Vec<f64>,
    pub param_grad: Vec<f64>,
    pub input_grad_norms: Option<Vec<f64>>,
}

struct MlpView<'a> {
    w1: &'a [f64], // hidden x feature_dim, row-major
    b1: &'a [f64],
    w2: &'a [f64],
    b2: f64,
    fdim: usize,
    hdim: usize,
}

fn mlp_view(weights: &[f64], fdim: usize, hdim: usize) -> MlpView<'_> {
    let (w1, rest) = weights.split_at(hdim * fdim);
    let (b1, rest) = rest.split_at(hdim);
    let (w2, rest) = rest.split_at(hdim);
    MlpView { w1, b1, w2, b2: rest[0], fdim, hdim }
}

impl ScorerParams {
    pub fn new(arch: Architecture, feature_map: FeatureMap, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != arch.param_count() {
            return Err(CoreError::InvalidInput("weight vector length mismatch".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(CoreError::InvalidInput("non-finite weight".into()));
        }
        if let Architecture::Tabular { n_states, n_actions } = arch {
            match feature_map {
                FeatureMap::OneHot { n_states: ns, n_actions: na }
                    if ns == n_states && na == n_actions => {}
                _ => {
                    return Err(CoreError::InvalidInput(
                        "tabular scorer requires a matching one-hot feature map".into(),
                    ))
                }
            }
        }
        if let Architecture::Mlp { feature_dim, .. } = arch {
            if feature_dim != feature_map.dim() {
                return Err(CoreError::InvalidInput("feature_dim does not match feature map".into()));
            }
        }
        Ok(Self { arch, feature_map, weights })
    }

    /// Seeded uniform initialization in [-INIT_SCALE, INIT_SCALE].
    pub fn init(arch: Architecture, feature_map: FeatureMap, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let weights = (0..arch.param_count())
            .map(|_| rng.gen_range(-INIT_SCALE..INIT_SCALE))
            .collect();
        Self::new(arch, feature_map, weights)
    }

    /// Raw scorer output g(s,a) for each batch element.
    pub fn score(&self, batch: &[(usize, usize)]) -> Result<Vec<f64>> {
        if batch.is_empty() {
            return Err(CoreError::InvalidInput("empty batch".into()));
        }
        batch.iter().map(|&(s, a)| self.score_one(s, a)).collect()
    }

    pub fn score_one(&self, state: usize, action: usize) -> Result<f64> {
        match self.arch {
            Architecture::Tabular { n_states, n_actions } => {
                if state >= n_states || action >= n_actions {
                    return Err(CoreError::InvalidInput(format!(
                        "state {state} or action {action} out of range"
                    )));
                }
                Ok(self.weights[state * n_actions + action])
            }
            Architecture::Mlp { .. } => {
                let x = self.feature_map.embed(state, action)?;
                Ok(self.score_features(&x))
            }
        }
    }

    /// Evaluate on an arbitrary feature vector (tabular scorers act
    /// bilinearly on the state and action one-hot blocks).
    pub fn score_features(&self, x: &[f64]) -> f64 {
        match self.arch {
            Architecture::Tabular { n_states, n_actions } => {
                let (xs, xa) = x.split_at(n_states);
                let mut g = 0.0;
                for s in 0..n_states {
                    if xs[s] == 0.0 {
                        continue;
                    }
                    for a in 0..n_actions {
                        g += self.weights[s * n_actions + a] * xs[s] * xa[a];
                    }
                }
                g
            }
            Architecture::Mlp { feature_dim, hidden_dim } => {
                let m = mlp_view(&self.weights, feature_dim, hidden_dim);
                let mut y = m.b2;
                for j in 0..m.hdim {
                    let mut z = m.b1[j];
                    for k in 0..m.fdim {
                        z += m.w1[j * m.fdim + k] * x[k];
                    }
                    y += m.w2[j] * z.tanh();
                }
                y
            }
        }
    }

    /// Gradient of the scorer output with respect to the feature vector.
    pub fn feature_grad(&self, x: &[f64]) -> Vec<f64> {
        match self.arch {
            Architecture::Tabular { n_states, n_actions } => {
                let (xs, xa) = x.split_at(n_states);
                let mut g = vec![0.0; x.len()];
                for s in 0..n_states {
                    for a in 0..n_actions {
                        let w = self.weights[s * n_actions + a];
                        g[s] += w * xa[a];
                        g[n_states + a] += w * xs[s];
                    }
                }
                g
            }
            Architecture::Mlp { feature_dim, hidden_dim } => {
                let m = mlp_view(&self.weights, feature_dim, hidden_dim);
                let mut g = vec![0.0; m.fdim];
                for j in 0..m.hdim {
                    let mut z = m.b1[j];
                    for k in 0..m.fdim {
                        z += m.w1[j * m.fdim + k] * x[k];
                    }
                    let u = m.w2[j] * (1.0 - z.tanh().powi(2));
                    for k in 0..m.fdim {
                        g[k] += u * m.w1[j * m.fdim + k];
                    }
                }
                g
            }
        }
    }

    /// Scores the batch, applies `loss` (returning the loss value and its
    /// gradient in the scores) and backpropagates to the parameters.
    pub fn loss_grad<F>(&self, batch: &[(usize, usize)], loss: F) -> Result<GradResult>
    where
        F: FnOnce(&[f64]) -> (f64, Vec<f64>),
    {
        let values = self.score(batch)?;
        let (loss_value, dscores) = loss(&values);
        if !loss_value.is_finite() || dscores.iter().any(|d| !d.is_finite()) {
            return Err(CoreError::Numeric("non-finite loss or score gradient".into()));
        }
        if dscores.len() != values.len() {
            return Err(CoreError::InvalidInput("score-gradient length mismatch".into()));
        }
        let mut param_grad = vec![0.0; self.weights.len()];
        match self.arch {
            Architecture::Tabular { n_actions, .. } => {
                for (&(s, a), &d) in batch.iter().zip(&dscores) {
                    param_grad[s * n_actions + a] += d;
                }
            }
            Architecture::Mlp { feature_dim, hidden_dim } => {
                let m = mlp_view(&self.weights, feature_dim, hidden_dim);
                let w1_off = 0;
                let b1_off = hidden_dim * feature_dim;
                let w2_off = b1_off + hidden_dim;
                let b2_off = w2_off + hidden_dim;
                for (&(s, a), &d) in batch.iter().zip(&dscores) {
                    let x = self.feature_map.embed(s, a)?;
                    for j in 0..hidden_dim {
                        let mut z = m.b1[j];
                        for k in 0..feature_dim {
                            z += m.w1[j * feature_dim + k] * x[k];
                        }
                        let h = z.tanh();
                        param_grad[w2_off + j] += d * h;
                        let dz = d * m.w2[j] * (1.0 - h * h);
                        param_grad[b1_off + j] += dz;
                        for k in 0..feature_dim {
                            param_grad[w1_off + j * feature_dim + k] += dz * x[k];
                        }
                    }
                    param_grad[b2_off] += d;
                }
            }
        }
        Ok(GradResult { values, param_grad, input_grad_norms: None })
    }

    /// Pure gradient step; `ascent` adds, `descent` subtracts.
    pub fn sgd_step(&self, grad: &[f64], lr: f64, direction: StepDirection) -> Result<ScorerParams> {
        if lr <= 0.0 {
            return Err(CoreError::InvalidInput("lr must be positive".into()));
        }
        if grad.len() != self.weights.len() {
            return Err(CoreError::InvalidInput("gradient length mismatch".into()));
        }
        let sign = match direction {
            StepDirection::Ascent => 1.0,
            StepDirection::Descent => -1.0,
        };
        let weights = self
            .weights
            .iter()
            .zip(grad)
            .map(|(w, g)| w + sign * lr * g)
            .collect();
        ScorerParams::new(self.arch, self.feature_map, weights)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepDirection {
    Ascent,
    Descent,
}

/// Where the Lipschitz penalty expectation is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PenaltyPoints {
    #[default]
    Interpolated,
    AgentOnly,
}

/// Uniform random convex combinations of expert and agent feature embeddings
/// (or the agent embeddings themselves under `AgentOnly`).
pub fn interpolate_batch(
    feature_map: &FeatureMap,
    expert_batch: &[(usize, usize)],
    agent_batch: &[(usize, usize)],
    seed: u64,
    points: PenaltyPoints,
) -> Result<Vec<Vec<f64>>> {
    if expert_batch.is_empty() || agent_batch.is_empty() {
        return Err(CoreError::InvalidInput("empty batch".into()));
    }
    let n = expert_batch.len().min(agent_batch.len());
    let mut rng = rng_from_seed(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let xa = feature_map.embed(agent_batch[i].0, agent_batch[i].1)?;
        match points {
            PenaltyPoints::AgentOnly => out.push(xa),
            PenaltyPoints::Interpolated => {
                let xe = feature_map.embed(expert_batch[i].0, expert_batch[i].1)?;
                let u: f64 = rng.gen::<f64>();
                out.push(xe.iter().zip(&xa).map(|(e, a)| u * e + (1.0 - u) * a).collect());
            }
        }
    }
    Ok(out)
}

/// Gradient penalty Psi = -mean_i (||grad_x g(x_i)||_2 - 1)^2, together with
/// its analytic gradient in the scorer parameters.
pub fn lipschitz_penalty_and_grad(
    scorer: &ScorerParams,
    features: &[Vec<f64>],
) -> Result<(f64, Vec<f64>)> {
    if features.is_empty() {
        return Err(CoreError::InvalidInput("empty feature batch".into()));
    }
    let n = features.len() as f64;
    let mut psi = 0.0;
    let mut grad = vec![0.0; scorer.weights.len()];
    for x in features {
        let gx = scorer.feature_grad(x);
        let norm = gx.iter().map(|v| v * v).sum::<f64>().sqrt();
        psi -= (norm - 1.0).powi(2) / n;
        if norm < 1e-12 {
            // Subgradient at the norm kink; zero contribution.
            continue;
        }
        // d/dpsi of -(norm-1)^2 / n, chained through d norm = gx' d gx / norm.
        let scale = -2.0 * (norm - 1.0) / (norm * n);
        accumulate_mixed_grad(scorer, x, &gx, scale, &mut grad)?;
    }
    Ok((psi, grad))
}

/// Adds scale * d(gx . a)/dw to `grad`, where a = gx is held fixed: the
/// second-order term of the penalty.
fn accumulate_mixed_grad(
    scorer: &ScorerParams,
    x: &[f64],
    gx: &[f64],
    scale: f64,
    grad: &mut [f64],
) -> Result<()> {
    match scorer.arch {
        Architecture::Tabular { n_states, n_actions } => {
            let (xs, xa) = x.split_at(n_states);
            let (gs, ga) = gx.split_at(n_states);
            for s in 0..n_states {
                for a in 0..n_actions {
                    grad[s * n_actions + a] += scale * (gs[s] * xa[a] + ga[a] * xs[s]);
                }
            }
        }
        Architecture::Mlp { feature_dim, hidden_dim } => {
            let m = mlp_view(&scorer.weights, feature_dim, hidden_dim);
            let b1_off = hidden_dim * feature_dim;
            let w2_off = b1_off + hidden_dim;
            for j in 0..hidden_dim {
                let mut z = m.b1[j];
                for k in 0..feature_dim {
                    z += m.w1[j * feature_dim + k] * x[k];
                }
                let h = z.tanh();
                let sech2 = 1.0 - h * h;
                let u = m.w2[j] * sech2;
                // q_j = W1 row j dotted with the fixed direction gx.
                let mut q = 0.0;
                for k in 0..feature_dim {
                    q += m.w1[j * feature_dim + k] * gx[k];
                }
                grad[w2_off + j] += scale * sech2 * q;
                let dz = scale * q * (-2.0 * m.w2[j] * h * sech2);
                grad[b1_off + j] += dz;
                for k in 0..feature_dim {
                    grad[j * feature_dim + k] += scale * gx[k] * u + dz * x[k];
                }
            }
        }
    }
    Ok(())
}

/// Flat text serialization with an architecture header; exact round trip.
pub fn scorer_to_text(scorer: &ScorerParams) -> String {
    let mut out = String::from("scorer v1 ");
    match scorer.arch {
        Architecture::Tabular { n_states, n_actions } => {
            out.push_str(&format!("tabular {n_states} {n_actions}"));
        }
        Architecture::Mlp { feature_dim, hidden_dim } => {
            out.push_str(&format!("mlp {feature_dim} {hidden_dim}"));
        }
    }
    match scorer.feature_map {
        FeatureMap::OneHot { n_states, n_actions } => {
            out.push_str(&format!(" onehot {n_states} {n_actions}\n"));
        }
        FeatureMap::GridCoords { width, height, n_actions } => {
            out.push_str(&format!(" grid {width} {height} {n_actions}\n"));
        }
    }
    for w in &scorer.weights {
        out.push_str(&format!("{}\n", hexfloat(*w)));
    }
    out
}

pub fn scorer_from_text(text: &str) -> Result<ScorerParams> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(CoreError::Parse { line: 0, msg: "empty scorer file".into() })?;
    let toks: Vec<&str> = header.split_whitespace().collect();
    if !(toks.len() == 8 || toks.len() == 9) || toks[0] != "scorer" || toks[1] != "v1" {
        return Err(CoreError::Parse { line: 1, msg: "bad scorer header".into() });
    }
    let parse = |t: &str| -> Result<usize> {
        t.parse().map_err(|_| CoreError::Parse { line: 1, msg: format!("bad integer '{t}'") })
    };
    let arch = match toks[2] {
        "tabular" => Architecture::Tabular { n_states: parse(toks[3])?, n_actions: parse(toks[4])? },
        "mlp" => Architecture::Mlp { feature_dim: parse(toks[3])?, hidden_dim: parse(toks[4])? },
        other => return Err(CoreError::Parse { line: 1, msg: format!("unknown arch '{other}'") }),
    };
    let feature_map = match toks[5] {
        "onehot" => FeatureMap::OneHot { n_states: parse(toks[6])?, n_actions: parse(toks[7])? },
        "grid" if toks.len() == 9 => FeatureMap::GridCoords {
            width: parse(toks[6])?,
            height: parse(toks[7])?,
            n_actions: parse(toks[8])?,
        },
        other => return Err(CoreError::Parse { line: 1, msg: format!("unknown feature map '{other}'") }),
    };
    let mut weights = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        weights.push(parse_hexfloat(line.trim()).ok_or(CoreError::Parse {
            line: i + 2,
            msg: format!("bad weight '{line}'"),
        })?);
    }
    ScorerParams::new(arch, feature_map, weights)
}

/// Lossless f64 <-> text via bit pattern.
pub fn hexfloat(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

pub fn parse_hexfloat(s: &str) -> Option<f64> {
    u64::from_str_radix(s, 16).ok().map(f64::from_bits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tabular(ns: usize, na: usize, w: Vec<f64>) -> ScorerParams {
        ScorerParams::new(
            Architecture::Tabular { n_states: ns, n_actions: na },
            FeatureMap::OneHot { n_states: ns, n_actions: na },
            w,
        )
        .unwrap()
    }

    fn mlp(fm: FeatureMap, hidden: usize, seed: u64) -> ScorerParams {
        ScorerParams::init(
            Architecture::Mlp { feature_dim: fm.dim(), hidden_dim: hidden },
            fm,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn tabular_zero_weights_score_zero() {
        let s = tabular(3, 2, vec![0.0; 6]);
        assert_eq!(s.score(&[(0, 0), (2, 1)]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn mlp_zero_output_weights_give_bias() {
        let fm = FeatureMap::OneHot { n_states: 2, n_actions: 2 };
        let arch = Architecture::Mlp { feature_dim: 4, hidden_dim: 3 };
        let mut w = vec![0.7; arch.param_count()];
        // zero w2, bias = 1.5
        let w2_off = 3 * 4 + 3;
        for x in &mut w[w2_off..w2_off + 3] {
            *x = 0.0;
        }
        w[w2_off + 3] = 1.5;
        let s = ScorerParams::new(arch, fm, w).unwrap();
        for v in s.score(&[(0, 0), (1, 1)]).unwrap() {
            assert_abs_diff_eq!(v, 1.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn mlp_matches_independent_forward_pass() {
        // Duplicate forward oracle: naive re-implementation from the weight
        // layout documentation.
        let fm = FeatureMap::GridCoords { width: 3, height: 3, n_actions: 4 };
        let s = mlp(fm, 5, 11);
        let (fdim, hdim) = (fm.dim(), 5);
        for (state, action) in [(0usize, 0usize), (4, 2), (8, 3)] {
            let x = fm.embed(state, action).unwrap();
            let mut y = s.weights[hdim * fdim + hdim + hdim];
            for j in 0..hdim {
                let mut z = s.weights[hdim * fdim + j];
                for k in 0..fdim {
                    z += s.weights[j * fdim + k] * x[k];
                }
                y += s.weights[hdim * fdim + hdim + j] * z.tanh();
            }
            assert_abs_diff_eq!(s.score_one(state, action).unwrap(), y, epsilon = 1e-12);
        }
    }

    #[test]
    fn loss_grad_mean_loss_gives_visit_counts() {
        let s = tabular(2, 2, vec![0.0; 4]);
        let batch = vec![(0, 0), (0, 0), (1, 1), (0, 1)];
        let res = s
            .loss_grad(&batch, |scores| {
                let n = scores.len() as f64;
                (scores.iter().sum::<f64>() / n, vec![1.0 / n; scores.len()])
            })
            .unwrap();
        assert_abs_diff_eq!(res.param_grad[0], 0.5, epsilon = 1e-15); // (0,0) twice
        assert_abs_diff_eq!(res.param_grad[1], 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(res.param_grad[2], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(res.param_grad[3], 0.25, epsilon = 1e-15);
    }

    #[test]
    fn loss_grad_constant_loss_zero_grad() {
        let fm = FeatureMap::OneHot { n_states: 3, n_actions: 2 };
        let s = mlp(fm, 4, 5);
        let res = s
            .loss_grad(&[(0, 0), (2, 1)], |scores| (0.0, vec![0.0; scores.len()]))
            .unwrap();
        assert!(res.param_grad.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn sgd_step_zero_grad_identity_and_inverse() {
        let s = tabular(2, 2, vec![0.1, -0.2, 0.3, 0.4]);
        let same = s.sgd_step(&vec![0.0; 4], 1.0, StepDirection::Ascent).unwrap();
        assert_eq!(same.weights, s.weights);
        let g = vec![0.5, -1.0, 0.25, 2.0];
        let fwd = s.sgd_step(&g, 0.3, StepDirection::Ascent).unwrap();
        let back = fwd.sgd_step(&g, 0.3, StepDirection::Descent).unwrap();
        for (a, b) in back.weights.iter().zip(&s.weights) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn sgd_descent_converges_on_quadratic() {
        // loss = (w - 3)^2 on a one-parameter tabular scorer.
        let mut s = tabular(1, 1, vec![0.0]);
        for _ in 0..10_000 {
            let grad = vec![2.0 * (s.weights[0] - 3.0)];
            s = s.sgd_step(&grad, 0.1, StepDirection::Descent).unwrap();
            if (s.weights[0] - 3.0).abs() < 1e-7 {
                break;
            }
        }
        assert!((s.weights[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn interpolate_identical_batches_gives_shared_embeddings() {
        let fm = FeatureMap::OneHot { n_states: 3, n_actions: 2 };
        let batch = vec![(0, 1), (2, 0)];
        let pts = interpolate_batch(&fm, &batch, &batch, 7, PenaltyPoints::Interpolated).unwrap();
        for (p, &(s, a)) in pts.iter().zip(&batch) {
            assert_eq!(*p, fm.embed(s, a).unwrap());
        }
    }

    #[test]
    fn interpolate_agent_only_returns_agent_embeddings() {
        let fm = FeatureMap::OneHot { n_states: 3, n_actions: 2 };
        let pts =
            interpolate_batch(&fm, &[(0, 0)], &[(2, 1)], 7, PenaltyPoints::AgentOnly).unwrap();
        assert_eq!(pts[0], fm.embed(2, 1).unwrap());
    }

    #[test]
    fn interpolation_weight_mean_is_half() {
        // Expert at state 0, agent at state 1: the state-0 coordinate of the
        // interpolated point is the mixing weight u itself.
        let fm = FeatureMap::OneHot { n_states: 2, n_actions: 1 };
        let n = 100_000;
        let expert = vec![(0usize, 0usize); n];
        let agent = vec![(1usize, 0usize); n];
        let pts = interpolate_batch(&fm, &expert, &agent, 13, PenaltyPoints::Interpolated).unwrap();
        let mean_u: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / n as f64;
        assert!((mean_u - 0.5).abs() < 0.01, "mean u {mean_u}");
    }

    #[test]
    fn penalty_zero_for_unit_norm_linear_scorer() {
        // Single-cell tabular scorer with weight 1/sqrt(2): the bilinear
        // feature gradient is (w, w), norm 1 at every point.
        let s = tabular(1, 1, vec![std::f64::consts::FRAC_1_SQRT_2]);
        let x = vec![1.0, 1.0];
        let (psi, grad) = lipschitz_penalty_and_grad(&s, &[x]).unwrap();
        assert_abs_diff_eq!(psi, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(grad[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn penalty_minus_one_for_constant_scorer() {
        let s = tabular(2, 2, vec![0.0; 4]);
        let pts = vec![
            FeatureMap::OneHot { n_states: 2, n_actions: 2 }.embed(0, 0).unwrap(),
            FeatureMap::OneHot { n_states: 2, n_actions: 2 }.embed(1, 1).unwrap(),
        ];
        let (psi, _) = lipschitz_penalty_and_grad(&s, &pts).unwrap();
        assert_abs_diff_eq!(psi, -1.0, epsilon = 1e-15);
    }

    #[test]
    fn penalty_gradient_matches_finite_differences() {
        for (arch, fm) in [
            (
                Architecture::Tabular { n_states: 3, n_actions: 2 },
                FeatureMap::OneHot { n_states: 3, n_actions: 2 },
            ),
            (
                Architecture::Mlp { feature_dim: 6, hidden_dim: 4 },
                FeatureMap::GridCoords { width: 2, height: 2, n_actions: 4 },
            ),
        ] {
            let fm = if matches!(arch, Architecture::Tabular { .. }) {
                fm
            } else {
                FeatureMap::GridCoords { width: 2, height: 2, n_actions: 4 }
            };
            let s = ScorerParams::init(arch, fm, 21).unwrap();
            let pts = interpolate_batch(
                &fm,
                &[(0, 0), (1, 1), (2, 0)],
                &[(1, 0), (0, 1), (2, 1)],
                9,
                PenaltyPoints::Interpolated,
            )
            .unwrap();
            let (_, grad) = lipschitz_penalty_and_grad(&s, &pts).unwrap();
            let h = 1e-6;
            for k in 0..s.weights.len() {
                let mut wp = s.weights.clone();
                wp[k] += h;
                let sp = ScorerParams::new(arch, fm, wp).unwrap();
                let mut wm = s.weights.clone();
                wm[k] -= h;
                let sm = ScorerParams::new(arch, fm, wm).unwrap();
                let (pp, _) = lipschitz_penalty_and_grad(&sp, &pts).unwrap();
                let (pm, _) = lipschitz_penalty_and_grad(&sm, &pts).unwrap();
                let fd = (pp - pm) / (2.0 * h);
                let denom = fd.abs().max(grad[k].abs()).max(1e-8);
                assert!(
                    (fd - grad[k]).abs() / denom < 1e-4,
                    "param {k}: fd {fd} vs analytic {}",
                    grad[k]
                );
            }
        }
    }

    #[test]
    fn feature_grad_matches_finite_differences() {
        let fm = FeatureMap::GridCoords { width: 3, height: 2, n_actions: 4 };
        let s = mlp(fm, 4, 33);
        let x = fm.embed(3, 2).unwrap();
        let g = s.feature_grad(&x);
        let h = 1e-6;
        for k in 0..x.len() {
            let mut xp = x.clone();
            xp[k] += h;
            let mut xm = x.clone();
            xm[k] -= h;
            let fd = (s.score_features(&xp) - s.score_features(&xm)) / (2.0 * h);
            assert_abs_diff_eq!(g[k], fd, epsilon = 1e-6);
        }
    }

    #[test]
    fn serialization_round_trip_exact() {
        for s in [
            tabular(3, 2, vec![0.1, -2.5e-17, 3.0, f64::MIN_POSITIVE, 0.0, 1e300]),
            mlp(FeatureMap::OneHot { n_states: 2, n_actions: 2 }, 3, 4),
            mlp(FeatureMap::GridCoords { width: 2, height: 3, n_actions: 4 }, 2, 5),
        ] {
            let text = scorer_to_text(&s);
            let back = scorer_from_text(&text).unwrap();
            assert_eq!(back, s);
            assert_eq!(scorer_to_text(&back), text);
        }
    }

    #[test]
    fn serialization_rejects_garbage() {
        assert!(scorer_from_text("").is_err());
        assert!(scorer_from_text("scorer v2 tabular 1 1 onehot 1 1\n").is_err());
        assert!(scorer_from_text("scorer v1 tabular 1 1 onehot 1 1\nzz\n").is_err());
        assert!(scorer_from_text("scorer v1 cube 1 1 onehot 1 1\n0\n").is_err());
    }

    #[test]
    fn constructor_validation() {
        let arch = Architecture::Tabular { n_states: 2, n_actions: 2 };
        let bad_fm = FeatureMap::OneHot { n_states: 3, n_actions: 2 };
        assert!(ScorerParams::new(arch, bad_fm, vec![0.0; 4]).is_err());
        let fm = FeatureMap::OneHot { n_states: 2, n_actions: 2 };
        assert!(ScorerParams::new(arch, fm, vec![0.0; 5]).is_err());
        assert!(ScorerParams::new(arch, fm, vec![f64::NAN, 0.0, 0.0, 0.0]).is_err());
        let s = ScorerParams::new(arch, fm, vec![0.0; 4]).unwrap();
        assert!(s.score_one(5, 0).is_err());
        assert!(s.score(&[]).is_err());
        assert!(s.sgd_step(&[0.0; 3], 1.0, StepDirection::Ascent).is_err());
        assert!(s.sgd_step(&[0.0; 4], 0.0, StepDirection::Ascent).is_err());
    }
}
