//! Augmented Dickey-Fuller (constant, no trend) and KPSS (level) tests.
//!
//! ADF rejection is evidence *for* stationarity; KPSS rejection is evidence
//! *against* it. Critical values are the MacKinnon (2010) response surfaces
//! for ADF and the Kwiatkowski et al. level-stationarity table for KPSS.

use nalgebra::DMatrix;

use super::{ols_fit, LevelDecision, StatError, TestResult};

const MIN_LEN: usize = 20;

/// MacKinnon (2010) response-surface coefficients, constant-only case, one
/// variable: `crit(T) = b0 + b1/T + b2/T^2 + b3/T^3`.
const ADF_SURFACE: [(&str, f64, [f64; 4]); 3] = [
    ("1%", 0.01, [-3.43035, -6.5393, -16.786, -79.433]),
    ("5%", 0.05, [-2.86154, -2.8903, -4.234, -40.040]),
    ("10%", 0.10, [-2.56677, -1.5384, -2.809, 0.0]),
];

const KPSS_LEVEL_TABLE: [(&str, f64, f64); 4] = [
    ("1%", 0.01, 0.739),
    ("2.5%", 0.025, 0.574),
    ("5%", 0.05, 0.463),
    ("10%", 0.10, 0.347),
];

/// Schwert's rule `floor(12 (n/100)^(1/4))`.
pub fn schwert_lags(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

fn check_len(x: &[f64]) -> Result<(), StatError> {
    if x.len() < MIN_LEN {
        return Err(StatError::TooShort {
            needed: MIN_LEN,
            have: x.len(),
        });
    }
    Ok(())
}

/// ADF regression `dy_t = a + b y_{t-1} + sum_i g_i dy_{t-i} + e_t` with a
/// fixed Schwert lag order (capped at `n/2 - 2` so the regression keeps
/// positive residual degrees of freedom). The statistic is the t-ratio of `b`.
pub fn adf_test(x: &[f64]) -> Result<TestResult, StatError> {
    check_len(x)?;
    let n = x.len();
    let lags = schwert_lags(n).min((n / 2).saturating_sub(2));
    let dy: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    // Rows cover dy[t] for t in lags..dy.len(); dy[t] = x[t+1] - x[t].
    let nobs = dy.len() - lags;
    let k = 2 + lags;
    let design = DMatrix::from_fn(nobs, k, |r, c| {
        let t = r + lags;
        match c {
            0 => 1.0,
            1 => x[t],
            j => dy[t - (j - 1)],
        }
    });
    let target: Vec<f64> = dy[lags..].to_vec();
    let fit = ols_fit(&design, &target)?;
    let statistic = if fit.std_err[1] > 0.0 {
        fit.coef[1] / fit.std_err[1]
    } else if fit.coef[1] < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    };
    let t = nobs as f64;
    let levels = ADF_SURFACE
        .iter()
        .map(|(label, alpha, b)| {
            let critical = b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t);
            LevelDecision {
                label: label.to_string(),
                alpha: *alpha,
                critical,
                reject: statistic < critical,
            }
        })
        .collect();
    Ok(TestResult {
        statistic,
        df: None,
        lags: Some(lags),
        levels,
    })
}

/// Hobijn-Franses-Ooms automatic bandwidth for the Newey-West estimator.
fn kpss_auto_bandwidth(resid: &[f64]) -> usize {
    let n = resid.len();
    let cov_lags = (n as f64).powf(2.0 / 9.0) as usize;
    let mut s0 = resid.iter().map(|e| e * e).sum::<f64>() / n as f64;
    let mut s1 = 0.0;
    for i in 1..=cov_lags.min(n - 1) {
        let prod: f64 = resid[i..].iter().zip(resid).map(|(a, b)| a * b).sum::<f64>() / (n as f64 / 2.0);
        s0 += prod;
        s1 += i as f64 * prod;
    }
    if s0 <= 0.0 {
        return 0;
    }
    let s_hat = s1 / s0;
    let gamma = 1.1447 * (s_hat * s_hat).powf(1.0 / 3.0);
    (gamma * (n as f64).powf(1.0 / 3.0)) as usize
}

/// Newey-West long-run variance with a Bartlett kernel.
fn long_run_variance(resid: &[f64], lags: usize) -> f64 {
    let n = resid.len();
    let mut s = resid.iter().map(|e| e * e).sum::<f64>();
    for i in 1..=lags {
        let prod: f64 = resid[i..].iter().zip(resid).map(|(a, b)| a * b).sum();
        s += 2.0 * prod * (1.0 - i as f64 / (lags as f64 + 1.0));
    }
    s / n as f64
}

/// KPSS level-stationarity test with automatic Newey-West bandwidth.
pub fn kpss_test(x: &[f64]) -> Result<TestResult, StatError> {
    check_len(x)?;
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let resid: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let lags = kpss_auto_bandwidth(&resid).min(n - 1);
    let mut cum = 0.0;
    let mut eta = 0.0;
    for e in &resid {
        cum += e;
        eta += cum * cum;
    }
    eta /= (n * n) as f64;
    let lrv = long_run_variance(&resid, lags);
    let statistic = if lrv > 0.0 { eta / lrv } else { 0.0 };
    let levels = KPSS_LEVEL_TABLE
        .iter()
        .map(|(label, alpha, critical)| LevelDecision {
            label: label.to_string(),
            alpha: *alpha,
            critical: *critical,
            reject: statistic > *critical,
        })
        .collect();
    Ok(TestResult {
        statistic,
        df: None,
        lags: Some(lags),
        levels,
    })
}
