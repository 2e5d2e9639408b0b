//! Tree surrogates for black-box forecasters.
//!
//! Sliding windows over the training region are sent to the black box; the
//! first forecast value of each window becomes the regression target of a
//! [`TreeEnsemble`] over statistics of the same window. The last share of
//! windows is held out to measure how faithfully the surrogate reproduces the
//! black box.

use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::data::{DomainProfile, TimeSeries};
use crate::features::FeatureMatrix;
use crate::features::{DomainExtra, FeatureSpec, FeatureState};
use crate::forecast::{gbdt_fit, GbdtParams, Loss, TreeEnsemble};
use crate::harness::{mase, smape};
use crate::statkit::population_std;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub params: GbdtParams,
    pub holdout_fraction: f64,
    /// Distance between consecutive window starts.
    pub stride: usize,
    /// Keep only the most recent windows when set.
    pub max_windows: Option<usize>,
    /// Fidelity is flagged poor when RMSE >= this share of the black-box output std.
    pub poor_ratio: f64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            params: GbdtParams {
                loss: Loss::L2,
                ..GbdtParams::default()
            },
            holdout_fraction: 0.2,
            stride: 1,
            max_windows: None,
            poor_ratio: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    pub surrogate: TreeEnsemble,
    pub feature_spec: FeatureSpec,
    /// Features of the requested spec that do not fit in the context window.
    pub dropped_features: Vec<String>,
    pub rolling_windows: Vec<usize>,
    pub n_train_windows: usize,
    pub n_holdout_windows: usize,
    pub fidelity_rmse: f64,
    pub blackbox_std: f64,
    pub poor_fidelity: bool,
    /// Population std of the series, the reference scale for the RMSE.
    pub series_scale: f64,
    pub blackbox_smape: f64,
    pub surrogate_smape: f64,
    pub blackbox_mase: Option<f64>,
    pub surrogate_mase: Option<f64>,
}

/// Surrogate with the held-out rows it was scored on.
#[derive(Debug, Clone)]
pub struct SurrogateFit {
    pub report: SurrogateReport,
    pub holdout: FeatureMatrix,
    pub holdout_blackbox: Vec<f64>,
}

/// Removes features that need more history than `context` values.
pub fn fit_spec_to_context(spec: &FeatureSpec, context: usize) -> (FeatureSpec, Vec<String>) {
    let mut kept = spec.clone();
    let mut dropped = Vec::new();
    kept.lags.retain(|&k| {
        let ok = k <= context;
        if !ok {
            dropped.push(format!("lag_{k}"));
        }
        ok
    });
    kept.rolling_means.retain(|&w| {
        let ok = w <= context;
        if !ok {
            dropped.push(format!("rolling_mean_{w}"));
        }
        ok
    });
    kept.extras.retain(|e| {
        let need = match e {
            DomainExtra::LogReturn => 2,
            DomainExtra::Volatility { window } => window + 1,
            DomainExtra::ZeroIndicator => 1,
            DomainExtra::DiffLastVsLag7 => 7,
        };
        let ok = need <= context;
        if !ok {
            dropped.push(format!("{e:?}"));
        }
        ok
    });
    (kept, dropped)
}

/// Fits a surrogate of `blackbox` over windows of `train`.
///
/// `blackbox(context, horizon)` is asked for `profile.horizon` values and its
/// first value is the target. Windows are split chronologically; the last
/// `holdout_fraction` of them is never used for fitting.
pub fn fit_surrogate<F, E>(
    blackbox: F,
    train: &TimeSeries,
    profile: &DomainProfile,
    spec: Option<FeatureSpec>,
    cfg: &SurrogateConfig,
) -> Result<SurrogateFit, ExplainError>
where
    F: Fn(&TimeSeries, usize) -> Result<Vec<f64>, E>,
    E: std::fmt::Display,
{
    if !(cfg.holdout_fraction > 0.0 && cfg.holdout_fraction < 1.0) || cfg.stride == 0 {
        return Err(ExplainError::BadConfig(
            "holdout_fraction must be in (0, 1) and stride >= 1".into(),
        ));
    }
    let c = profile.context;
    let requested = spec.unwrap_or_else(|| FeatureSpec::surrogate_default(profile.seasonal_period));
    let (spec, dropped_features) = fit_spec_to_context(&requested, c);
    spec.validate()?;
    if spec.names().is_empty() {
        return Err(ExplainError::SpecInfeasible(
            "no feature fits in the context window".into(),
        ));
    }
    let n = train.len();
    let mut starts: Vec<usize> = (0..n.saturating_sub(c)).step_by(cfg.stride).collect();
    if let Some(max) = cfg.max_windows {
        let skip = starts.len().saturating_sub(max);
        starts.drain(..skip);
    }
    if starts.len() < 5 {
        return Err(ExplainError::SpecInfeasible(format!(
            "{} windows of context {c} in a series of length {n}; need at least 5",
            starts.len()
        )));
    }

    let mut rows = Vec::with_capacity(starts.len());
    let mut outputs = Vec::with_capacity(starts.len());
    for &i in &starts {
        let ctx = train.slice(i..i + c)?;
        let fc = blackbox(&ctx, profile.horizon).map_err(|e| ExplainError::BlackboxUnavailable(e.to_string()))?;
        let first = *fc
            .first()
            .filter(|v| v.is_finite())
            .ok_or_else(|| ExplainError::BlackboxUnavailable("empty or non-finite forecast".into()))?;
        rows.push(FeatureState::from_series(&spec, &ctx).row()?);
        outputs.push(first);
    }

    let n_hold = ((starts.len() as f64 * cfg.holdout_fraction).round() as usize).clamp(1, starts.len() - 1);
    let n_fit = starts.len() - n_hold;
    let truth: Vec<f64> = starts.iter().map(|&i| train.values()[i + c]).collect();
    let names = spec.names();
    let fit_matrix = FeatureMatrix {
        names: names.clone(),
        rows: rows[..n_fit].to_vec(),
        target: outputs[..n_fit].to_vec(),
        row_time_index: starts[..n_fit].iter().map(|i| i + c).collect(),
    };
    let surrogate = gbdt_fit(&fit_matrix, &cfg.params)?;

    let holdout = FeatureMatrix {
        names,
        rows: rows[n_fit..].to_vec(),
        target: truth[n_fit..].to_vec(),
        row_time_index: starts[n_fit..].iter().map(|i| i + c).collect(),
    };
    let bb = &outputs[n_fit..];
    let sur: Vec<f64> = holdout.rows.iter().map(|r| surrogate.predict(r)).collect();
    let fidelity_rmse = (bb.iter().zip(&sur).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n_hold as f64).sqrt();
    let blackbox_std = population_std(bb);
    let poor_fidelity = if blackbox_std > 0.0 {
        fidelity_rmse >= cfg.poor_ratio * blackbox_std
    } else {
        fidelity_rmse > 0.0
    };
    let insample = &train.values()[..starts[n_fit] + c];
    let period = profile.seasonal_period.max(1);
    let report = SurrogateReport {
        rolling_windows: spec.rolling_means.iter().copied().collect(),
        feature_spec: spec,
        dropped_features,
        n_train_windows: n_fit,
        n_holdout_windows: n_hold,
        fidelity_rmse,
        blackbox_std,
        poor_fidelity,
        series_scale: population_std(train.values()),
        blackbox_smape: smape(&holdout.target, bb)?,
        surrogate_smape: smape(&holdout.target, &sur)?,
        blackbox_mase: mase(&holdout.target, bb, insample, period).ok(),
        surrogate_mase: mase(&holdout.target, &sur, insample, period).ok(),
        surrogate,
    };
    Ok(SurrogateFit {
        report,
        holdout,
        holdout_blackbox: bb.to_vec(),
    })
}
