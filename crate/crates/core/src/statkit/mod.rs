//! Statistical kernels: autocorrelation, ADF/KPSS stationarity tests, Welch's
//! two-sample t-test, robust scaling and weighted least squares.

mod linalg;
mod scaler;
mod stationarity;
mod ttest;

pub use linalg::{ols_fit, wls_fit, OlsFit};
pub use scaler::{quantile, RobustScalerParams};
pub use stationarity::{adf_test, kpss_test, schwert_lags};
pub use ttest::{t_test_two_sample, CONFIDENCE_LEVELS};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatError {
    #[error("zero variance")]
    ZeroVariance,
    #[error("sample too short: need {needed}, have {have}")]
    TooShort { needed: usize, have: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("negative or non-finite weight")]
    BadWeight,
    #[error("linear system is singular")]
    Singular,
}

/// Decision at one significance level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDecision {
    /// Human label, e.g. `"5%"` (significance) or `"95%"` (confidence).
    pub label: String,
    /// Significance level alpha.
    pub alpha: f64,
    pub critical: f64,
    pub reject: bool,
}

/// Outcome of a hypothesis test at a fixed set of levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    /// Degrees of freedom, when the test has them.
    pub df: Option<f64>,
    /// Lags used (ADF augmentation or KPSS bandwidth).
    pub lags: Option<usize>,
    pub levels: Vec<LevelDecision>,
}

impl TestResult {
    /// Rejection decision at significance `alpha`, if that level was evaluated.
    pub fn reject_at(&self, alpha: f64) -> Option<bool> {
        self.levels
            .iter()
            .find(|l| (l.alpha - alpha).abs() < 1e-12)
            .map(|l| l.reject)
    }

    pub fn critical_at(&self, alpha: f64) -> Option<f64> {
        self.levels
            .iter()
            .find(|l| (l.alpha - alpha).abs() < 1e-12)
            .map(|l| l.critical)
    }
}

/// Sample autocorrelation for lags `0..=max_lag`.
pub fn acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>, StatError> {
    if x.len() <= max_lag {
        return Err(StatError::TooShort {
            needed: max_lag + 1,
            have: x.len(),
        });
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let centered: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    if denom <= 0.0 || !denom.is_finite() {
        return Err(StatError::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|k| {
            let num: f64 = centered[k..].iter().zip(&centered).map(|(a, b)| a * b).sum();
            num / denom
        })
        .collect())
}

/// Highest local maximum of the ACF over lags `2..=max_lag` that clears a
/// Bartlett band, Bonferroni-adjusted for the number of lags scanned. A
/// monotonically decaying ACF has no peak.
pub fn acf_peak(x: &[f64], max_lag: usize) -> Option<usize> {
    let r = acf(x, max_lag + 1).ok()?;
    let n = x.len() as f64;
    let tail = 0.025 / max_lag.max(1) as f64;
    let z = Normal::new(0.0, 1.0).ok()?.inverse_cdf(1.0 - tail);
    let mut cum = 0.0;
    let mut band = vec![0.0; max_lag + 1];
    for k in 1..=max_lag {
        band[k] = z * ((1.0 + 2.0 * cum) / n).sqrt();
        cum += r[k] * r[k];
    }
    (2..=max_lag)
        .filter(|&k| r[k] > band[k] && r[k] > r[k - 1] && r[k] >= r[k + 1])
        .max_by(|&a, &b| r[a].total_cmp(&r[b]).then(b.cmp(&a)))
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance (n - 1 denominator); 0 for fewer than 2 points.
pub fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Population standard deviation (n denominator).
pub fn population_std(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Median (average of the two middle values for even lengths).
pub fn median(x: &[f64]) -> f64 {
    quantile(x, 0.5)
}
