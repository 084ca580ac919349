//! Subcommand implementations, exposed as a library for testing.

use std::path::{Path, PathBuf};

use ailab_core::demos::{build_demo_set, make_d1_policies, make_d2_policies, DemoSet, NoiseKind};
use ailab_core::fdiv::{js_spec, tv_spec};
use ailab_core::mdp::{evaluate_return, value_iteration};
use ailab_core::oracle::{
    closed_form_fdiv, eq8_maximizer, exact_objective_js, kl_decomposition, optimal_discriminator,
    verify_theorem1_tightness, verify_theorem2_by_optimization, MixtureInstance,
};
use ailab_core::scorer::{hexfloat, scorer_to_text};
use ailab_core::stats::{mean, std_dev, welch_t_test};
use ailab_core::trainer::{
    run_record_from_text, run_record_to_text, train, Method, RunRecord, TrainConfig,
};
use ailab_core::{SoftmaxPolicy, StochasticPolicy, TabularMdp};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

/// CLI flag overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub method: Option<String>,
    pub alpha: Option<f64>,
}

fn out_dir(cfg: &ExperimentConfig, ov: &Overrides) -> PathBuf {
    ov.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output_dir))
}

/// Atomic write: temp file in the target directory, then rename.
fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(
        ".tmp-{}-{}",
        std::process::id(),
        path.file_name().and_then(|n| n.to_str()).unwrap_or("file")
    ));
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn make_non_optimal(
    mdp: &TabularMdp,
    optimal: &StochasticPolicy,
    kind: NoiseKind,
    levels: &[f64],
    seed: u64,
) -> Result<Vec<StochasticPolicy>> {
    Ok(match kind {
        NoiseKind::Checkpoint => make_d1_policies(mdp, levels, seed)?,
        NoiseKind::ActionNoise => make_d2_policies(mdp, optimal, levels)?,
    })
}

fn generate_demos(
    cfg: &ExperimentConfig,
    mdp: &TabularMdp,
    levels: &[f64],
    seed: u64,
) -> Result<(DemoSet, Vec<f64>)> {
    let (_, optimal) = value_iteration(mdp, 1e-10)?;
    let spec = cfg.noise_spec()?;
    let non_optimal = make_non_optimal(mdp, &optimal, spec.kind, levels, seed)?;
    let mut source_returns = vec![evaluate_return(mdp, &optimal)?];
    for p in &non_optimal {
        source_returns.push(evaluate_return(mdp, p)?);
    }
    let demos = build_demo_set(
        mdp,
        &optimal,
        &non_optimal,
        cfg.demo.n_per_policy,
        cfg.demo.horizon,
        seed,
    )?;
    Ok((demos, source_returns))
}

pub fn cmd_gen_demos(cfg: &ExperimentConfig, base_dir: &Path, ov: &Overrides) -> Result<PathBuf> {
    let mdp = cfg.build_mdp(base_dir)?;
    let seed = ov.seed.unwrap_or(cfg.demo.seed);
    let (demos, source_returns) = generate_demos(cfg, &mdp, &cfg.demo.levels, seed)?;
    let dir = out_dir(cfg, ov);
    let path = dir.join(&cfg.demo.file);
    write_atomic(&path, &demos.to_text())?;
    // Provenance sidecar: per-source mean true return.
    let mut sidecar = format!("demosources v1 {} {}\n", cfg.demo.kind, seed);
    for (i, r) in source_returns.iter().enumerate() {
        let level = if i == 0 { "optimal".to_string() } else { format!("{}", cfg.demo.levels[i - 1]) };
        sidecar.push_str(&format!("{i} {level} {r}\n"));
        println!("source {i} ({level}): mean return {r}");
    }
    write_atomic(&path.with_extension("sources.txt"), &sidecar)?;
    println!("wrote {} transitions to {}", demos.len(), path.display());
    Ok(path)
}

fn run_artifacts(dir: &Path, cfg: &TrainConfig, record: &RunRecord) -> Result<PathBuf> {
    let stem = format!("run_{}_seed{}", cfg.method.as_str(), cfg.seed);
    let record_path = dir.join(format!("{stem}.txt"));
    write_atomic(&record_path, &run_record_to_text(cfg.method, cfg.seed, &record.iterations))?;
    write_atomic(&dir.join(format!("{stem}.policy.txt")), &policy_to_text(&record.final_policy))?;
    if let Some(scorer) = &record.final_scorer {
        write_atomic(&dir.join(format!("{stem}.scorer.txt")), &scorer_to_text(scorer))?;
    }
    Ok(record_path)
}

/// Logit table in hexfloat, one line per state; exact round trip.
pub fn policy_to_text(policy: &SoftmaxPolicy) -> String {
    let mut out = format!("policy v1 {} {}\n", policy.n_states, policy.n_actions);
    for s in 0..policy.n_states {
        let row: Vec<String> = (0..policy.n_actions)
            .map(|a| hexfloat(policy.logits[s * policy.n_actions + a]))
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn cmd_train(cfg: &ExperimentConfig, base_dir: &Path, ov: &Overrides) -> Result<PathBuf> {
    let mdp = cfg.build_mdp(base_dir)?;
    let dir = out_dir(cfg, ov);
    let demo_path = dir.join(&cfg.demo.file);
    let text = std::fs::read_to_string(&demo_path).map_err(|e| {
        CliError::Run(format!("demo file {} not found (run gen-demos first): {e}", demo_path.display()))
    })?;
    let demos = DemoSet::from_text(&text)?;
    let tc = cfg.train_config(ov.method.as_deref(), ov.alpha, ov.seed)?;
    let record = train(&mdp, &demos, &tc)?;
    let path = run_artifacts(&dir, &tc, &record)?;
    println!(
        "{} seed {} final return {}",
        tc.method.as_str(),
        tc.seed,
        record.final_return()
    );
    Ok(path)
}

/// Noise levels implied by a target optimal-demo ratio: k = round(1/r) - 1
/// non-optimal sources. When k matches the configured level count the
/// configured levels are used verbatim (so a single-cell sweep reproduces
/// cmd_train); otherwise levels are evenly spaced in [0.25, 0.7].
fn levels_for_ratio(ratio: f64, configured: &[f64]) -> Result<Vec<f64>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(CliError::Config(format!("ratio_optimal {ratio} outside (0,1]")));
    }
    let k = ((1.0 / ratio).round() as usize).saturating_sub(1);
    if k == 0 {
        return Err(CliError::Config(format!("ratio_optimal {ratio} leaves no non-optimal source")));
    }
    if k == configured.len() {
        return Ok(configured.to_vec());
    }
    if k == 1 {
        return Ok(vec![0.4]);
    }
    Ok((0..k).map(|i| 0.25 + 0.45 * i as f64 / (k - 1) as f64).collect())
}

struct Cell {
    method: Method,
    alpha: f64,
    ratio: f64,
    seed: u64,
}

struct CellOutcome {
    method: Method,
    alpha: f64,
    ratio: f64,
    seed: u64,
    result: std::result::Result<f64, String>,
}

pub fn cmd_sweep(cfg: &ExperimentConfig, base_dir: &Path, ov: &Overrides) -> Result<PathBuf> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("config has no [sweep] section".into()))?;
    let mdp = cfg.build_mdp(base_dir)?;
    let dir = out_dir(cfg, ov);
    let raw_dir = dir.join("sweep");
    std::fs::create_dir_all(&raw_dir)?;

    let mut cells = Vec::new();
    for m in &sweep.methods {
        let method = Method::from_str(m)?;
        for &alpha in &sweep.alphas {
            for &ratio in &sweep.ratio_optimal {
                for &seed in &sweep.seeds {
                    cells.push(Cell { method, alpha, ratio, seed });
                }
            }
        }
    }

    let demo_seed = ov.seed.unwrap_or(cfg.demo.seed);
    let outcomes: Vec<CellOutcome> = cells
        .par_iter()
        .map(|cell| {
            let result = (|| -> Result<f64> {
                let levels = levels_for_ratio(cell.ratio, &cfg.demo.levels)?;
                let (demos, _) = generate_demos(cfg, &mdp, &levels, demo_seed)?;
                let tc = cfg.train_config(Some(cell.method.as_str()), Some(cell.alpha), Some(cell.seed))?;
                let record = train(&mdp, &demos, &tc)?;
                let name = format!(
                    "run_{}_a{}_r{}_s{}.txt",
                    cell.method.as_str(),
                    cell.alpha,
                    cell.ratio,
                    cell.seed
                );
                write_atomic(
                    &raw_dir.join(name),
                    &run_record_to_text(tc.method, tc.seed, &record.iterations),
                )?;
                Ok(record.final_return())
            })();
            CellOutcome {
                method: cell.method,
                alpha: cell.alpha,
                ratio: cell.ratio,
                seed: cell.seed,
                result: result.map_err(|e| e.to_string()),
            }
        })
        .collect();

    let path = dir.join("summary.txt");
    write_atomic(&path, &summarize(&outcomes))?;
    println!("wrote {}", path.display());
    Ok(path)
}

/// Aggregates sweep outcomes into the versioned summary table, including
/// one-sided Welch p-values of each UID method against its matching
/// baseline at the same (alpha, ratio).
fn summarize(outcomes: &[CellOutcome]) -> String {
    let mut groups: std::collections::BTreeMap<(String, String, String), Vec<f64>> =
        std::collections::BTreeMap::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match &o.result {
            Ok(ret) => {
                groups
                    .entry((o.method.as_str().to_string(), format!("{}", o.alpha), format!("{}", o.ratio)))
                    .or_default()
                    .push(*ret);
            }
            Err(e) => failures.push(format!(
                "failed {} alpha={} ratio={} seed={}: {e}",
                o.method.as_str(),
                o.alpha,
                o.ratio,
                o.seed
            )),
        }
    }
    let baseline_of = |m: &str| -> Option<Method> {
        match m {
            "uid_gail" => Some(Method::Gail),
            "uid_wail" => Some(Method::Wail),
            _ => None,
        }
    };
    let mut out = String::from("summary v1\nmethod alpha ratio n mean std baseline p\n");
    for ((m, a, r), returns) in &groups {
        let (baseline, p) = match baseline_of(m) {
            Some(base) => {
                let base_key = (base.as_str().to_string(), a.clone(), r.clone());
                match groups.get(&base_key) {
                    Some(b) if returns.len() >= 2 && b.len() >= 2 => {
                        match welch_t_test(returns, b) {
                            Ok(w) => (base.as_str().to_string(), format!("{}", w.p_one_sided)),
                            Err(_) => (base.as_str().to_string(), "-".to_string()),
                        }
                    }
                    _ => ("-".to_string(), "-".to_string()),
                }
            }
            None => ("-".to_string(), "-".to_string()),
        };
        out.push_str(&format!(
            "{m} {a} {r} {} {} {} {baseline} {p}\n",
            returns.len(),
            mean(returns),
            std_dev(returns)
        ));
    }
    for f in failures {
        out.push_str(&f);
        out.push('\n');
    }
    out
}

/// Runs the fixed oracle battery; returns the report path and overall pass.
pub fn cmd_oracle(dir: &Path, self_test: bool) -> Result<(PathBuf, bool)> {
    let (report, passed) = oracle_battery(self_test);
    let path = dir.join("oracle_report.txt");
    write_atomic(&path, &report)?;
    print!("{report}");
    Ok((path, passed))
}

pub fn oracle_battery(self_test: bool) -> (String, bool) {
    let mut out = String::from("oracle v1\n");
    let mut passed = true;
    let mut max_residual: f64 = 0.0;

    // Theorem 2: optimization vs closed form on random mixtures. The
    // printed D* formula agrees with the stationary point of the training
    // objective at alpha = 1/2, which is where the check runs.
    for seed in 0..10u64 {
        let inst = MixtureInstance::random(5, 2, 0.5, 600 + seed);
        match verify_theorem2_by_optimization(&inst, 1e-3) {
            Ok(rep) => {
                max_residual = max_residual.max(rep.linf_to_closed_form);
                passed &= rep.passed;
                out.push_str(&format!("{rep}"));
            }
            Err(e) => {
                passed = false;
                out.push_str(&format!("theorem2 seed {seed} ERROR {e}\n"));
            }
        }
    }

    // Equilibrium value: objective (1-a)log(1-a) + a log a at rho_theta =
    // rho_eps = rho_e.
    {
        let table: Vec<f64> = (1..=8).map(|i| i as f64 / 36.0).collect();
        let alpha = 0.5;
        let inst = MixtureInstance::equilibrium(4, 2, table, alpha).unwrap();
        let c = (1.0 - alpha) * (1.0 - alpha).ln() + alpha * alpha.ln();
        match verify_theorem2_by_optimization(&inst, 1e-3) {
            Ok(rep) => {
                let obj_res = (rep.converged_objective - c).abs();
                let d_res = rep
                    .converged_d
                    .iter()
                    .map(|d| (d - alpha).abs())
                    .fold(0.0f64, f64::max);
                max_residual = max_residual.max(obj_res);
                let ok = obj_res < 1e-3 && d_res < 1e-2;
                passed &= ok;
                out.push_str(&format!(
                    "equilibrium alpha={alpha} objective={} expected={c} d_residual={d_res:.3e} {}\n",
                    rep.converged_objective,
                    if ok { "PASS" } else { "FAIL" }
                ));
            }
            Err(e) => {
                passed = false;
                out.push_str(&format!("equilibrium ERROR {e}\n"));
            }
        }
    }

    // KL decomposition identity at the stationary discriminator.
    {
        let alphas = [0.3, 0.5, 0.7, 0.9];
        let mut worst: f64 = 0.0;
        for i in 0..100u64 {
            let alpha = alphas[(i % 4) as usize];
            let inst = MixtureInstance::random(4, 2, alpha, 700 + i);
            let d = eq8_maximizer(&inst).unwrap();
            let obj = exact_objective_js(&inst, &d);
            let (c, te, tt) = kl_decomposition(&inst).unwrap();
            worst = worst.max((obj - (c + te + tt)).abs());
        }
        max_residual = max_residual.max(worst);
        let ok = worst < 1e-9;
        passed &= ok;
        out.push_str(&format!(
            "kl_decomposition 100 instances max_residual={worst:.3e} {}\n",
            if ok { "PASS" } else { "FAIL" }
        ));
    }

    // Frozen closed-form value.
    {
        let v = closed_form_fdiv(&[0.5, 0.5], &[0.25, 0.75], &js_spec()).unwrap();
        let expected = 0.0676441511372105;
        let res = (v - expected).abs();
        max_residual = max_residual.max(res);
        let ok = res < 1e-12;
        passed &= ok;
        out.push_str(&format!(
            "closed_form_js value={v} expected={expected} {}\n",
            if ok { "PASS" } else { "FAIL" }
        ));
    }

    // Theorem 1 tightness for js; tv gap reported only.
    for seed in 0..10u64 {
        let inst = MixtureInstance::random(4, 2, 0.5, 800 + seed);
        match verify_theorem1_tightness(&inst, &js_spec(), 1e-3) {
            Ok(rep) => {
                max_residual = max_residual.max((rep.optimized_value - rep.closed_form).abs());
                passed &= rep.passed;
                out.push_str(&format!("{rep}"));
            }
            Err(e) => {
                passed = false;
                out.push_str(&format!("theorem1 js seed {seed} ERROR {e}\n"));
            }
        }
    }
    {
        let inst = MixtureInstance::random(4, 2, 0.5, 900);
        match verify_theorem1_tightness(&inst, &tv_spec(), f64::INFINITY) {
            Ok(rep) => out.push_str(&format!(
                "theorem1 tv closed_form={} optimized={} gap={:.3e} REPORTED\n",
                rep.closed_form,
                rep.optimized_value,
                (rep.closed_form - rep.optimized_value).abs()
            )),
            Err(e) => {
                passed = false;
                out.push_str(&format!("theorem1 tv ERROR {e}\n"));
            }
        }
    }

    if self_test {
        // Negative control: an intentionally wrong alpha in the D* formula
        // must break the KL-decomposition identity.
        let inst = MixtureInstance::random(4, 2, 0.7, 1000);
        let wrong = MixtureInstance::new(
            &ailab_core::mdp::OccupancyMeasure::from_table(4, 2, inst.rho_e.clone()).unwrap(),
            &ailab_core::mdp::OccupancyMeasure::from_table(4, 2, inst.rho_theta.clone()).unwrap(),
            0.35,
        )
        .unwrap();
        let d_wrong = optimal_discriminator(&wrong).unwrap();
        let obj = exact_objective_js(&inst, &d_wrong);
        let (c, te, tt) = kl_decomposition(&inst).unwrap();
        let gap = (obj - (c + te + tt)).abs();
        let ok = gap > 1e-6;
        passed &= ok;
        out.push_str(&format!(
            "self_test wrong-alpha gap={gap:.3e} {}\n",
            if ok { "PASS (sensitivity demonstrated)" } else { "FAIL (perturbation undetected)" }
        ));
    }

    out.push_str(&format!(
        "oracle battery: {} max_residual={max_residual:.3e}\n",
        if passed { "PASS" } else { "FAIL" }
    ));
    (out, passed)
}

/// Merges run record files into one tidy CSV for plotting.
pub fn cmd_export_plots(files: &[PathBuf], dir: &Path) -> Result<PathBuf> {
    let mut out = String::from("plots v1\nmethod,seed,iter,return,acc_do,acc_dn,clamp_active_frac\n");
    let field = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for file in files {
        let text = std::fs::read_to_string(file)
            .map_err(|e| CliError::Run(format!("{}: {e}", file.display())))?;
        let (method, seed, iterations) = run_record_from_text(&text)?;
        for r in iterations {
            out.push_str(&format!(
                "{method},{seed},{},{},{},{},{}\n",
                r.iter,
                r.agent_return,
                field(r.acc_do),
                field(r.acc_dn),
                field(r.clamp_active_frac)
            ));
        }
    }
    let path = dir.join("plots.csv");
    write_atomic(&path, &out)?;
    println!("wrote {}", path.display());
    Ok(path)
}
