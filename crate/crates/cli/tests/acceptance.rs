//! Acceptance gate: one pass/fail line per criterion, exit code 1 on any
//! failure. Runs without the libtest harness so the lines always print.

use std::path::{Path, PathBuf};
use std::time::Instant;

use ailab_cli::{cmd_gen_demos, cmd_sweep, cmd_train, ExperimentConfig, Overrides};
use ailab_core::demos::DemoSet;
use ailab_core::fdiv::js_spec;
use ailab_core::mdp::occupancy;
use ailab_core::objective::{pu_risk, ClampMode, LossSide, MarginLoss, PuLossConfig};
use ailab_core::oracle::{
    eq8_maximizer, exact_objective_js, kl_decomposition, verify_theorem1_tightness,
    verify_theorem2_by_optimization, MixtureInstance,
};
use ailab_core::scorer::{
    interpolate_batch, lipschitz_penalty_and_grad, Architecture, FeatureMap, PenaltyPoints,
    ScorerParams,
};
use ailab_core::sim::{derive_seed, rng_from_seed};
use ailab_core::stats::{mean, welch_t_test};
use ailab_core::synth::{random_mdp, random_policy};
use ailab_core::trainer::{
    disc_loss_and_score_grad, train, IterationRecord, Method, RunRecord, TrainConfig,
};
use rand::Rng;
use rayon::prelude::*;

struct Gate {
    failures: usize,
}

impl Gate {
    fn check(&mut self, n: usize, desc: &str, pass: bool, detail: String) {
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!("criterion {n:2}: {verdict} - {desc} ({detail})");
        if !pass {
            self.failures += 1;
        }
    }
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn criterion_1(gate: &mut Gate) {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for seed in 0..10u64 {
        let inst = MixtureInstance::random(5, 2, 0.5, 600 + seed);
        match verify_theorem2_by_optimization(&inst, 1e-3) {
            Ok(rep) => {
                worst = worst.max(rep.linf_to_closed_form);
                ok &= rep.passed;
            }
            Err(_) => ok = false,
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 60.0;
    gate.check(
        1,
        "theorem 2 closed form by exact gradient ascent",
        ok,
        format!("max linf {worst:.2e}, {secs:.1}s"),
    );
}

fn criterion_2(gate: &mut Gate) {
    let alpha = 0.5;
    let table: Vec<f64> = (1..=8).map(|i| i as f64 / 36.0).collect();
    let inst = MixtureInstance::equilibrium(4, 2, table, alpha).unwrap();
    let c = (1.0 - alpha) * (1.0 - alpha).ln() + alpha * alpha.ln();
    let rep = verify_theorem2_by_optimization(&inst, 1e-3).unwrap();
    let obj_res = (rep.converged_objective - c).abs();
    let d_res = rep.converged_d.iter().map(|d| (d - alpha).abs()).fold(0.0f64, f64::max);
    gate.check(
        2,
        "equilibrium objective and discriminator values",
        obj_res < 1e-3 && d_res < 1e-2,
        format!("objective residual {obj_res:.2e}, D residual {d_res:.2e}"),
    );
}

fn criterion_3(gate: &mut Gate) {
    let alphas = [0.3, 0.5, 0.7, 0.9];
    let mut worst: f64 = 0.0;
    for i in 0..100u64 {
        let inst = MixtureInstance::random(4, 2, alphas[(i % 4) as usize], 700 + i);
        let d = eq8_maximizer(&inst).unwrap();
        let obj = exact_objective_js(&inst, &d);
        let (c, te, tt) = kl_decomposition(&inst).unwrap();
        worst = worst.max((obj - (c + te + tt)).abs());
    }
    gate.check(
        3,
        "KL decomposition identity on 100 random mixtures",
        worst < 1e-9,
        format!("max residual {worst:.2e}"),
    );
}

fn criterion_4(gate: &mut Gate) {
    let mut ok = true;
    let mut worst_gap: f64 = 0.0;
    let mut worst_t: f64 = 0.0;
    for seed in 0..10u64 {
        match verify_theorem1_tightness(&MixtureInstance::random(4, 2, 0.5, 800 + seed), &js_spec(), 1e-3)
        {
            Ok(rep) => {
                worst_gap = worst_gap.max((rep.optimized_value - rep.closed_form).abs());
                worst_t = worst_t.max(rep.t_star_linf);
                ok &= rep.passed;
            }
            Err(_) => ok = false,
        }
    }
    gate.check(
        4,
        "theorem 1 tightness for the js spec",
        ok,
        format!("max value gap {worst_gap:.2e}, max T* linf {worst_t:.2e}"),
    );
}

fn criterion_5(gate: &mut Gate) {
    // Exact-expectation batches: probabilities in multiples of 1/100.
    let alpha = 0.6;
    let rho_eps = [0.25, 0.45, 0.15, 0.15];
    let rho_th = [0.05, 0.30, 0.40, 0.25];
    let g = [1.3, -0.4, 0.2, -2.0];
    let rho_e: Vec<f64> =
        rho_eps.iter().zip(&rho_th).map(|(e, t)| (1.0 - alpha) * e + alpha * t).collect();
    let expand = |dens: &[f64]| -> Vec<f64> {
        let mut out = Vec::new();
        for (i, d) in dens.iter().enumerate() {
            out.extend(std::iter::repeat(g[i]).take((d * 100.0).round() as usize));
        }
        out
    };
    let exact: f64 = rho_eps
        .iter()
        .zip(&rho_th)
        .zip(&g)
        .map(|((e, t), gi)| {
            (1.0 - alpha) * e * MarginLoss::Logistic.eval(*gi)
                + alpha * t * MarginLoss::Logistic.eval(-*gi)
        })
        .sum();
    let cfg = PuLossConfig::new(alpha, ClampMode::None, LossSide::MinimizeRisk).unwrap();
    let est = pu_risk(&expand(&rho_e), &expand(&rho_th), MarginLoss::Logistic, &cfg).unwrap();
    let exact_gap = (est - exact).abs();

    // Sampled estimator: median absolute error must decay with batch size.
    let sample = |dens: &[f64], n: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|_| {
                let mut u: f64 = rng.gen();
                for (i, d) in dens.iter().enumerate() {
                    if u < *d {
                        return g[i];
                    }
                    u -= d;
                }
                g[3]
            })
            .collect()
    };
    let mut errs = [Vec::new(), Vec::new()];
    for rep in 0..50u64 {
        let mut rng = rng_from_seed(derive_seed(51, rep));
        for (k, n) in [(0usize, 100usize), (1, 10_000)] {
            let be = sample(&rho_e, n, &mut rng);
            let ba = sample(&rho_th, n, &mut rng);
            errs[k].push((pu_risk(&be, &ba, MarginLoss::Logistic, &cfg).unwrap() - exact).abs());
        }
    }
    let median = |v: &mut Vec<f64>| {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v[v.len() / 2]
    };
    let (m_small, m_large) = (median(&mut errs[0]), median(&mut errs[1]));
    gate.check(
        5,
        "PU risk unbiasedness and sampling consistency",
        exact_gap < 1e-12 && m_large < m_small,
        format!("exact gap {exact_gap:.2e}, median err {m_small:.2e} -> {m_large:.2e}"),
    );
}

fn clamp_inner(method: Method, alpha: f64, se: &[f64], sa: &[f64]) -> f64 {
    let d = |g: f64| ailab_core::fdiv::clamp_unit(ailab_core::fdiv::sigmoid(g));
    let m = |v: Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    match method {
        Method::UidGail => {
            m(se.iter().map(|g| d(*g).ln()).collect()) - alpha * m(sa.iter().map(|g| d(*g).ln()).collect())
        }
        Method::PuGail => {
            m(sa.iter().map(|g| (1.0 - d(*g)).ln()).collect())
                - alpha * m(se.iter().map(|g| (1.0 - d(*g)).ln()).collect())
        }
        Method::UidWail => m(se.to_vec()) - alpha * m(sa.to_vec()),
        _ => 1.0,
    }
}

fn criterion_6(gate: &mut Gate) {
    let methods = [Method::UidGail, Method::Gail, Method::UidWail, Method::PuGail];
    let (n_states, n_actions) = (3, 2);
    let fmap = FeatureMap::OneHot { n_states, n_actions };
    let lambda = 10.0;
    let mut worst_rel: f64 = 0.0;
    let mut ok = true;
    let full_loss = |scorer: &ScorerParams,
                     method: Method,
                     alpha: f64,
                     expert: &[(usize, usize)],
                     agent: &[(usize, usize)],
                     seed: u64| {
        let se = scorer.score(expert).unwrap();
        let sa = scorer.score(agent).unwrap();
        let (mut loss, _, _) = disc_loss_and_score_grad(method, alpha, &se, &sa).unwrap();
        if method.is_critic() {
            let points = interpolate_batch(&scorer.feature_map, expert, agent, seed, PenaltyPoints::Interpolated)
                .unwrap();
            loss += lambda * lipschitz_penalty_and_grad(scorer, &points).unwrap().0;
        }
        loss
    };
    for cfg_idx in 0..20u64 {
        let method = methods[(cfg_idx % 4) as usize];
        let mut rng = rng_from_seed(derive_seed(41, cfg_idx));
        let alpha = 0.3 + 0.6 * rng.gen::<f64>();
        let arch = if cfg_idx % 2 == 0 {
            Architecture::Tabular { n_states, n_actions }
        } else {
            Architecture::Mlp { feature_dim: fmap.dim(), hidden_dim: 4 }
        };
        let expert: Vec<(usize, usize)> =
            (0..6).map(|_| (rng.gen_range(0..n_states), rng.gen_range(0..n_actions))).collect();
        let agent: Vec<(usize, usize)> =
            (0..5).map(|_| (rng.gen_range(0..n_states), rng.gen_range(0..n_actions))).collect();
        let mut scorer = None;
        for attempt in 0..50u64 {
            let cand = ScorerParams::init(arch, fmap.clone(), derive_seed(cfg_idx, 100 + attempt)).unwrap();
            let se = cand.score(&expert).unwrap();
            let sa = cand.score(&agent).unwrap();
            if clamp_inner(method, alpha, &se, &sa).abs() > 1e-3 {
                scorer = Some(cand);
                break;
            }
        }
        let scorer = scorer.expect("no scorer away from the clamp kink");
        let penalty_seed = derive_seed(cfg_idx, 7);
        let mut all = expert.clone();
        all.extend_from_slice(&agent);
        let ne = expert.len();
        let grad_res = scorer
            .loss_grad(&all, |scores| {
                let (loss, dscores, _) =
                    disc_loss_and_score_grad(method, alpha, &scores[..ne], &scores[ne..]).unwrap();
                (loss, dscores)
            })
            .unwrap();
        let mut analytic = grad_res.param_grad;
        if method.is_critic() {
            let points =
                interpolate_batch(&fmap, &expert, &agent, penalty_seed, PenaltyPoints::Interpolated).unwrap();
            let (_, psi_grad) = lipschitz_penalty_and_grad(&scorer, &points).unwrap();
            for (g, p) in analytic.iter_mut().zip(&psi_grad) {
                *g += lambda * p;
            }
        }
        let h = 1e-5;
        for i in 0..scorer.weights.len() {
            let mut plus = scorer.clone();
            plus.weights[i] += h;
            let mut minus = scorer.clone();
            minus.weights[i] -= h;
            let fd = (full_loss(&plus, method, alpha, &expert, &agent, penalty_seed)
                - full_loss(&minus, method, alpha, &expert, &agent, penalty_seed))
                / (2.0 * h);
            let rel = (analytic[i] - fd).abs() / analytic[i].abs().max(1.0);
            worst_rel = worst_rel.max(rel);
            ok &= rel <= 1e-4;
        }
    }
    gate.check(
        6,
        "analytic gradients vs finite differences, 20 configurations",
        ok,
        format!("max relative error {worst_rel:.2e}"),
    );
}

fn criterion_7(gate: &mut Gate) {
    let mut worst_mass: f64 = 0.0;
    let mut worst_flow: f64 = 0.0;
    let mut worst_rt: f64 = 0.0;
    for seed in 0..100u64 {
        let n_states = 3 + (seed % 5) as usize;
        let n_actions = 2 + (seed % 2) as usize;
        let gamma = 0.8 + 0.15 * (seed % 3) as f64 / 2.0;
        let mdp = random_mdp(n_states, n_actions, gamma, derive_seed(11, seed));
        let policy = random_policy(n_states, n_actions, derive_seed(12, seed));
        let rho = occupancy(&mdp, &policy, 1e-12).unwrap();
        worst_mass = worst_mass.max((rho.table().iter().sum::<f64>() - 1.0).abs());
        worst_flow = worst_flow.max(rho.flow_residual(&mdp));
        let rho2 = occupancy(&mdp, &rho.recover_policy(), 1e-12).unwrap();
        let linf = rho
            .table()
            .iter()
            .zip(rho2.table())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        worst_rt = worst_rt.max(linf);
    }
    gate.check(
        7,
        "occupancy invariants on 100 random MDPs",
        worst_mass < 1e-10 && worst_flow < 1e-8 && worst_rt < 1e-8,
        format!("mass {worst_mass:.2e}, flow {worst_flow:.2e}, round trip {worst_rt:.2e}"),
    );
}

struct Bench {
    mdp: ailab_core::TabularMdp,
    demos: DemoSet,
    gail_cfg: ExperimentConfig,
    wail_cfg: ExperimentConfig,
}

fn load_benchmark() -> Bench {
    let dir = configs_dir();
    let gail_cfg = ExperimentConfig::from_path(&dir.join("benchmark.toml")).unwrap();
    let wail_cfg = ExperimentConfig::from_path(&dir.join("benchmark_wail.toml")).unwrap();
    let mdp = gail_cfg.build_mdp(&dir).unwrap();
    let tmp = tempfile::tempdir().unwrap();
    let ov = Overrides { out: Some(tmp.path().to_path_buf()), ..Default::default() };
    let path = cmd_gen_demos(&gail_cfg, &dir, &ov).unwrap();
    let demos = DemoSet::from_text(&std::fs::read_to_string(path).unwrap()).unwrap();
    Bench { mdp, demos, gail_cfg, wail_cfg }
}

/// Five-seed batch of one method at one alpha under one config.
fn run_batch(bench: &Bench, cfg: &ExperimentConfig, method: &str, alpha: f64) -> Vec<RunRecord> {
    [1u64, 2, 3, 4, 5]
        .par_iter()
        .map(|&seed| {
            let tc: TrainConfig = cfg.train_config(Some(method), Some(alpha), Some(seed)).unwrap();
            train(&bench.mdp, &bench.demos, &tc).unwrap()
        })
        .collect()
}

fn finals(records: &[RunRecord]) -> Vec<f64> {
    records.iter().map(|r| r.final_return()).collect()
}

fn pair_verdict(uid: &[f64], base: &[f64]) -> (usize, f64) {
    let wins = uid.iter().zip(base).filter(|(u, b)| u > b).count();
    let p = welch_t_test(uid, base).map(|w| w.p_one_sided).unwrap_or(1.0);
    (wins, p)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v[v.len() / 2]
}

fn acc_dn_final(records: &[RunRecord]) -> Vec<f64> {
    records
        .iter()
        .map(|r| r.iterations.last().and_then(|it| it.acc_dn).unwrap_or(f64::NAN))
        .collect()
}

fn acc_do_window_mean(iters: &[IterationRecord], first: bool) -> f64 {
    let k = (iters.len() / 10).max(1);
    let slice = if first { &iters[..k] } else { &iters[iters.len() - k..] };
    mean(&slice.iter().filter_map(|r| r.acc_do).collect::<Vec<_>>())
}

fn main() {
    let mut gate = Gate { failures: 0 };
    criterion_1(&mut gate);
    criterion_2(&mut gate);
    criterion_3(&mut gate);
    criterion_4(&mut gate);
    criterion_5(&mut gate);
    criterion_6(&mut gate);
    criterion_7(&mut gate);

    let bench = load_benchmark();
    let bench_alpha = bench.gail_cfg.train.alpha.unwrap();

    // Criterion 8: UID vs baseline, five seeds each, shared per-family
    // hyperparameters, with the wall-clock budget per pair.
    let start = Instant::now();
    let uid_gail = run_batch(&bench, &bench.gail_cfg, "uid_gail", bench_alpha);
    let gail = run_batch(&bench, &bench.gail_cfg, "gail", bench_alpha);
    let gail_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let uid_wail = run_batch(&bench, &bench.wail_cfg, "uid_wail", bench_alpha);
    let wail = run_batch(&bench, &bench.wail_cfg, "wail", bench_alpha);
    let wail_secs = start.elapsed().as_secs_f64();
    let (gw, gp) = pair_verdict(&finals(&uid_gail), &finals(&gail));
    let (ww, wp) = pair_verdict(&finals(&uid_wail), &finals(&wail));
    gate.check(
        8,
        "UID beats its baseline on the canonical benchmark",
        gw >= 4 && gp < 0.1 && ww >= 4 && wp < 0.1 && gail_secs < 600.0 && wail_secs < 600.0,
        format!(
            "gail pair {gw}/5 wins p={gp:.3} in {gail_secs:.0}s; wail pair {ww}/5 wins p={wp:.3} in {wail_secs:.0}s"
        ),
    );

    // Criterion 9 uses alpha = 0.7, where the converged discriminator level
    // 1 - alpha sits below the classification threshold.
    let uid_gail_07 = run_batch(&bench, &bench.gail_cfg, "uid_gail", 0.7);
    let dn_gap = median(acc_dn_final(&uid_gail_07)) - median(acc_dn_final(&gail));
    let do_first = median(uid_gail_07.iter().map(|r| acc_do_window_mean(&r.iterations, true)).collect());
    let do_last = median(uid_gail_07.iter().map(|r| acc_do_window_mean(&r.iterations, false)).collect());
    gate.check(
        9,
        "self-paced discriminator accuracy diagnostics",
        dn_gap >= 0.2 && do_first > do_last,
        format!("acc_dn median gap {dn_gap:.3}, acc_do first 10% {do_first:.3} vs last 10% {do_last:.3}"),
    );

    // Criterion 10: PU-GAIL does not beat UID-GAIL.
    let pu_gail = run_batch(&bench, &bench.gail_cfg, "pu_gail", bench_alpha);
    let (pu_mean, uid_mean) = (mean(&finals(&pu_gail)), mean(&finals(&uid_gail)));
    gate.check(
        10,
        "PU-GAIL mean return does not exceed UID-GAIL's",
        pu_mean <= uid_mean,
        format!("pu_gail {pu_mean:.3} vs uid_gail {uid_mean:.3}"),
    );

    // Criterion 11: alpha tolerance against behavioral cloning.
    let bc_mean = mean(&finals(&run_batch(&bench, &bench.gail_cfg, "bc", bench_alpha)));
    let uid_05 = mean(&finals(&run_batch(&bench, &bench.gail_cfg, "uid_gail", 0.5)));
    let uid_07 = mean(&finals(&uid_gail_07));
    let uid_03 = mean(&finals(&uid_gail));
    gate.check(
        11,
        "UID-GAIL beats BC for alpha in {0.3, 0.5, 0.7}",
        uid_03 > bc_mean && uid_05 > bc_mean && uid_07 > bc_mean,
        format!("uid {uid_03:.3}/{uid_05:.3}/{uid_07:.3} vs bc {bc_mean:.3}"),
    );

    // Criterion 12: byte-identical artifacts across two invocations.
    let small = r#"
[env]
layout = """
S...
....
...G
"""

[demo]
levels = [0.4, 0.6]
n_per_policy = 40
seed = 5

[train]
method = "uid_gail"
alpha = 0.5
iters = 30
batch_size = 64
rollout_per_iter = 8
horizon = 40

[sweep]
methods = ["uid_gail", "gail"]
alphas = [0.5]
ratio_optimal = [0.333]
seeds = [1, 2]
"#;
    let invoke = || {
        let tmp = tempfile::tempdir().unwrap();
        let cfg_path = tmp.path().join("exp.toml");
        std::fs::write(&cfg_path, small).unwrap();
        let cfg = ExperimentConfig::from_path(&cfg_path).unwrap();
        let out = tmp.path().join("out");
        let ov = Overrides { out: Some(out.clone()), ..Default::default() };
        let demo = cmd_gen_demos(&cfg, tmp.path(), &ov).unwrap();
        let run = cmd_train(&cfg, tmp.path(), &ov).unwrap();
        let summary = cmd_sweep(&cfg, tmp.path(), &ov).unwrap();
        (
            std::fs::read_to_string(demo).unwrap(),
            std::fs::read_to_string(run).unwrap(),
            std::fs::read_to_string(summary).unwrap(),
        )
    };
    let a = invoke();
    let b = invoke();
    gate.check(
        12,
        "byte-identical demos, run records, and summaries",
        a == b,
        format!(
            "demo {} run {} summary {}",
            a.0 == b.0,
            a.1 == b.1,
            a.2 == b.2
        ),
    );

    if gate.failures > 0 {
        println!("acceptance: {} criterion(s) failed", gate.failures);
        std::process::exit(1);
    }
    println!("acceptance: all 12 criteria passed");
}
