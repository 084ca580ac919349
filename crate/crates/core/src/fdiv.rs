//! f-divergence specifications linking margin losses, discriminator
//! transforms and reward maps.

use std::collections::BTreeMap;

use crate::error::{CoreError, Result};

/// Discriminator outputs are clamped away from {0, 1} before logs.
pub const D_CLAMP: f64 = 1e-7;

pub fn clamp_unit(d: f64) -> f64 {
    d.clamp(D_CLAMP, 1.0 - D_CLAMP)
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// One f-divergence instantiation: the convex generator `f`, its Fenchel
/// conjugate with domain, the derivative (for the tightness condition
/// T* = f'(mu/nu)), the slope limit f(u)/u as u -> inf (zero-mass
/// convention), the map from raw scorer output g to the decision function T,
/// and the map from raw scorer output to the agent's reward.
#[derive(Clone, Copy)]
pub struct FDivSpec {
    pub name: &'static str,
    pub f: fn(f64) -> f64,
    pub f_prime: fn(f64) -> f64,
    pub conjugate: fn(f64) -> f64,
    pub conjugate_prime: fn(f64) -> f64,
    /// Closed-interval conjugate domain; infinite bounds mean unbounded.
    pub conjugate_domain: (f64, f64),
    pub inf_slope: f64,
    pub decision_transform: fn(f64) -> f64,
    pub reward_map: fn(f64) -> f64,
}

impl FDivSpec {
    pub fn in_domain(&self, t: f64) -> bool {
        t.is_finite() && t >= self.conjugate_domain.0 && t <= self.conjugate_domain.1
    }

    pub fn check_domain(&self, t: f64) -> Result<()> {
        if !self.in_domain(t) {
            return Err(CoreError::InvalidInput(format!(
                "T value {t} outside the domain of {}-conjugate",
                self.name
            )));
        }
        Ok(())
    }
}

fn js_f(u: f64) -> f64 {
    if u == 0.0 {
        return std::f64::consts::LN_2;
    }
    u * u.ln() - (u + 1.0) * ((u + 1.0) / 2.0).ln()
}

fn js_f_prime(u: f64) -> f64 {
    (2.0 * u / (u + 1.0)).ln()
}

// True Fenchel conjugate of js_f: f*(t) = -log(2 - e^t) on t < log 2.
fn js_conjugate(t: f64) -> f64 {
    -(2.0 - t.exp()).ln()
}

fn js_conjugate_prime(t: f64) -> f64 {
    let e = t.exp();
    e / (2.0 - e)
}

fn one(_t: f64) -> f64 {
    1.0
}

// f-GAN output activation for js: T = log(2D) keeps T inside the conjugate
// domain and makes the variational objective coincide with the
// discriminator loss up to the additive constant log 2.
fn js_decision(g: f64) -> f64 {
    (2.0 * clamp_unit(sigmoid(g))).ln()
}

fn js_reward(g: f64) -> f64 {
    -(1.0 - clamp_unit(sigmoid(g))).ln()
}

fn tv_f(u: f64) -> f64 {
    0.5 * (u - 1.0).abs()
}

fn tv_f_prime(u: f64) -> f64 {
    if u > 1.0 {
        0.5
    } else if u < 1.0 {
        -0.5
    } else {
        0.0
    }
}

fn identity(t: f64) -> f64 {
    t
}

pub fn js_spec() -> FDivSpec {
    FDivSpec {
        name: "js",
        f: js_f,
        f_prime: js_f_prime,
        conjugate: js_conjugate,
        conjugate_prime: js_conjugate_prime,
        // exp(t) must stay below 2; the D clamp keeps 2D <= 2(1 - 1e-7).
        conjugate_domain: (f64::NEG_INFINITY, (2.0 * (1.0 - D_CLAMP_LOG_GUARD)).ln()),
        inf_slope: std::f64::consts::LN_2,
        decision_transform: js_decision,
        reward_map: js_reward,
    }
}

const D_CLAMP_LOG_GUARD: f64 = D_CLAMP;

pub fn tv_spec() -> FDivSpec {
    FDivSpec {
        name: "tv",
        f: tv_f,
        f_prime: tv_f_prime,
        conjugate: identity,
        conjugate_prime: one,
        conjugate_domain: (-0.5, 0.5),
        inf_slope: 0.5,
        decision_transform: identity,
        reward_map: identity,
    }
}

/// Registry of the supported f-divergence pairs.
pub fn fdiv_registry() -> BTreeMap<&'static str, FDivSpec> {
    let mut m = BTreeMap::new();
    m.insert("js", js_spec());
    m.insert("tv", tv_spec());
    m
}

pub fn lookup_fdiv(name: &str) -> Result<FDivSpec> {
    fdiv_registry()
        .get(name)
        .copied()
        .ok_or_else(|| CoreError::UnknownDivergence(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn generators_vanish_at_one() {
        for (_, spec) in fdiv_registry() {
            assert_abs_diff_eq!((spec.f)(1.0), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn js_conjugate_frozen_value() {
        // f*(log 0.5) = -log(3/2), computed independently.
        let spec = js_spec();
        assert_abs_diff_eq!(
            (spec.conjugate)(0.5f64.ln()),
            -0.4054651081081644,
            epsilon = 1e-12
        );
    }

    #[test]
    fn tv_conjugate_is_identity_on_domain() {
        let spec = tv_spec();
        assert_abs_diff_eq!((spec.conjugate)(0.3), 0.3, epsilon = 1e-15);
        assert!(spec.in_domain(0.5));
        assert!(spec.in_domain(-0.5));
        assert!(!spec.in_domain(0.51));
    }

    #[test]
    fn fenchel_inequality_sampled() {
        // f(u) >= u t - f*(t) for all u >= 0 and t in the conjugate domain,
        // with equality at t = f'(u).
        for (_, spec) in fdiv_registry() {
            for i in 1..40 {
                let u = i as f64 * 0.1;
                for j in 0..40 {
                    let lo = spec.conjugate_domain.0.max(-5.0);
                    let hi = spec.conjugate_domain.1.min(5.0);
                    let t = lo + (hi - lo) * j as f64 / 39.0;
                    let lhs = (spec.f)(u);
                    let rhs = u * t - (spec.conjugate)(t);
                    assert!(lhs >= rhs - 1e-10, "{}: f({u}) < {u}*{t} - f*({t})", spec.name);
                }
                let t_star = (spec.f_prime)(u);
                if spec.in_domain(t_star) && (u - 1.0).abs() > 1e-9 {
                    let gap = (spec.f)(u) - (u * t_star - (spec.conjugate)(t_star));
                    assert!(gap.abs() < 1e-9, "{}: tightness gap {gap} at u={u}", spec.name);
                }
            }
        }
    }

    #[test]
    fn js_conjugate_prime_matches_finite_differences() {
        let spec = js_spec();
        for t in [-3.0, -1.0, -0.3, -0.05f64] {
            let h = 1e-6;
            let fd = ((spec.conjugate)(t + h) - (spec.conjugate)(t - h)) / (2.0 * h);
            assert_abs_diff_eq!((spec.conjugate_prime)(t), fd, epsilon = 1e-5);
        }
    }

    #[test]
    fn js_decision_transform_is_log_2d() {
        let spec = js_spec();
        for g in [-3.0, 0.0, 2.5] {
            let t = (spec.decision_transform)(g);
            assert_abs_diff_eq!(
                t,
                (2.0 * clamp_unit(sigmoid(g))).ln(),
                epsilon = 1e-15
            );
            assert!(spec.in_domain(t));
            assert_abs_diff_eq!(
                (spec.reward_map)(g),
                -(1.0 - clamp_unit(sigmoid(g))).ln(),
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn js_f_zero_convention() {
        assert_abs_diff_eq!(js_f(0.0), std::f64::consts::LN_2, epsilon = 1e-15);
        // Continuity: f(u) -> f(0) as u -> 0+.
        assert_abs_diff_eq!(js_f(1e-12), std::f64::consts::LN_2, epsilon = 1e-9);
    }

    #[test]
    fn inf_slopes() {
        // f(u)/u limits: log 2 for js, 1/2 for tv.
        assert_abs_diff_eq!(js_f(1e8) / 1e8, js_spec().inf_slope, epsilon = 1e-6);
        assert_abs_diff_eq!(tv_f(1e8) / 1e8, tv_spec().inf_slope, epsilon = 1e-6);
    }

    #[test]
    fn lookup_and_registry() {
        assert!(lookup_fdiv("js").is_ok());
        assert!(lookup_fdiv("tv").is_ok());
        assert!(matches!(lookup_fdiv("chi2"), Err(CoreError::UnknownDivergence(_))));
        let names: Vec<&str> = fdiv_registry().keys().cloned().collect();
        assert_eq!(names, vec!["js", "tv"]);
    }

    #[test]
    fn domain_check_errors() {
        let spec = tv_spec();
        assert!(spec.check_domain(0.6).is_err());
        assert!(spec.check_domain(f64::NAN).is_err());
        assert!(spec.check_domain(0.0).is_ok());
    }
}
