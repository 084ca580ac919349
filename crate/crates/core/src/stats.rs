//! Summary statistics and the one-sided Welch t-test used in benchmark
//! reporting.

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{CoreError, Result};

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator); 0 for a single sample.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// One-sided p-value for the alternative mean(a) > mean(b).
    pub p_one_sided: f64,
}

/// Welch's unequal-variance t-test, one-sided with the null
/// "mean(a) <= mean(b)".
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<WelchResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(CoreError::InvalidInput("welch test needs at least 2 samples per side".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (std_dev(a).powi(2), std_dev(b).powi(2));
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        // Degenerate: both samples constant.
        let p = if ma > mb {
            0.0
        } else if ma < mb {
            1.0
        } else {
            0.5
        };
        return Ok(WelchResult { t: f64::INFINITY * (ma - mb).signum(), df: f64::NAN, p_one_sided: p });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2.powi(2) / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| CoreError::Numeric(format!("t-distribution: {e}")))?;
    let p = 1.0 - dist.cdf(t);
    Ok(WelchResult { t, df, p_one_sided: p })
}
