//! Explanations: segment LIME over the forecast context, exact TreeSHAP for
//! tree ensembles, and tree surrogates that make black-box forecasters
//! explainable with TreeSHAP.

pub mod lime;
pub mod shap;
pub mod surrogate;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub use lime::{lime_explain, perturb, segment_uniform, ExplainTarget, LimeConfig, Perturbation, SegmentAttribution};
pub use shap::{global_shap, tree_shap, FeatureImportance, ShapExplanation};
pub use surrogate::{fit_spec_to_context, fit_surrogate, SurrogateConfig, SurrogateFit, SurrogateReport};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::features::FeatureError;
use crate::forecast::ForecastError;
use crate::harness::HarnessError;
use crate::statkit::StatError;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("{segments} segments do not fit a context of length {len}")]
    TooManySegments { segments: usize, len: usize },
    #[error("invalid explainer config: {0}")]
    BadConfig(String),
    #[error("model call failed: {0}")]
    Model(String),
    #[error("black-box forecaster unavailable: {0}")]
    BlackboxUnavailable(String),
    #[error("feature spec infeasible: {0}")]
    SpecInfeasible(String),
    #[error("ensemble expects {expected} features, row has {got}")]
    FeatureMismatch { expected: usize, got: usize },
    #[error("nothing to aggregate")]
    NoRows,
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metric(#[from] HarnessError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Contents of `lime_<series>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeReport {
    pub series_id: String,
    pub model: String,
    pub context: Vec<f64>,
    pub config: LimeConfig,
    pub attribution: SegmentAttribution,
    pub metadata: BTreeMap<String, String>,
}

impl LimeReport {
    pub fn new(
        series_id: &str,
        model: &str,
        context: Vec<f64>,
        config: LimeConfig,
        attribution: SegmentAttribution,
    ) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert(
            "kernel".into(),
            format!("exp(-d^2/{}^2), d = normalized Hamming distance", config.kernel_width),
        );
        metadata.insert("segmentation".into(), "uniform".into());
        metadata.insert(
            "all_zero_mask".into(),
            if attribution.excluded_all_zero_mask {
                "excluded"
            } else {
                "allowed"
            }
            .into(),
        );
        if config.perturbation == Perturbation::InverseMax {
            metadata.insert("inverse_max".into(), "replacement = max(context) - value".into());
        }
        Self {
            series_id: series_id.into(),
            model: model.into(),
            context,
            config,
            attribution,
            metadata,
        }
    }

    pub fn file_name(&self) -> String {
        format!("lime_{}.json", sanitize(&self.series_id))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, ExplainError> {
        write_json(dir, &self.file_name(), self)
    }
}

/// Contents of `shap_<model>_<domain>.json`: one explanation per series (each
/// with its own base value) and a ranking pooled over all explained rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapReport {
    pub model: String,
    pub domain: String,
    pub series: Vec<SeriesShap>,
    pub global: Vec<FeatureImportance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesShap {
    pub series_id: String,
    pub explanation: ShapExplanation,
    /// Largest `|base + sum(values) - prediction|` over the rows.
    pub max_additivity_error: f64,
    /// Present when the explained ensemble is a surrogate of a black box.
    pub surrogate: Option<SurrogateSummary>,
}

impl SeriesShap {
    pub fn new(series_id: &str, explanation: ShapExplanation, surrogate: Option<&SurrogateReport>) -> Self {
        let max_additivity_error = explanation
            .values
            .iter()
            .zip(&explanation.predictions)
            .map(|(v, p)| (explanation.base_value + v.iter().sum::<f64>() - p).abs())
            .fold(0.0, f64::max);
        Self {
            series_id: series_id.into(),
            explanation,
            max_additivity_error,
            surrogate: surrogate.map(SurrogateSummary::from),
        }
    }
}

/// Rows of several explanations over the same features, stacked; the base
/// value is their mean, so the result is for ranking and plotting only.
pub fn pool_explanations<'a>(
    parts: impl IntoIterator<Item = &'a ShapExplanation>,
) -> Result<ShapExplanation, ExplainError> {
    let mut out: Option<ShapExplanation> = None;
    let mut bases = Vec::new();
    for e in parts {
        bases.push(e.base_value);
        match &mut out {
            None => out = Some(e.clone()),
            Some(acc) => {
                if acc.feature_names != e.feature_names {
                    return Err(ExplainError::FeatureMismatch {
                        expected: acc.feature_names.len(),
                        got: e.feature_names.len(),
                    });
                }
                acc.values.extend_from_slice(&e.values);
                acc.predictions.extend_from_slice(&e.predictions);
                acc.rows.extend_from_slice(&e.rows);
            }
        }
    }
    let mut pooled = out.ok_or(ExplainError::NoRows)?;
    pooled.base_value = bases.iter().sum::<f64>() / bases.len() as f64;
    Ok(pooled)
}

/// Surrogate diagnostics without the ensemble itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSummary {
    pub fidelity_rmse: f64,
    pub poor_fidelity: bool,
    pub blackbox_smape: f64,
    pub surrogate_smape: f64,
    pub blackbox_mase: Option<f64>,
    pub surrogate_mase: Option<f64>,
    pub n_train_windows: usize,
    pub n_holdout_windows: usize,
    pub rolling_windows: Vec<usize>,
    pub dropped_features: Vec<String>,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl From<&SurrogateReport> for SurrogateSummary {
    fn from(r: &SurrogateReport) -> Self {
        Self {
            fidelity_rmse: r.fidelity_rmse,
            poor_fidelity: r.poor_fidelity,
            blackbox_smape: r.blackbox_smape,
            surrogate_smape: r.surrogate_smape,
            blackbox_mase: r.blackbox_mase,
            surrogate_mase: r.surrogate_mase,
            n_train_windows: r.n_train_windows,
            n_holdout_windows: r.n_holdout_windows,
            rolling_windows: r.rolling_windows.clone(),
            dropped_features: r.dropped_features.clone(),
            max_depth: r.surrogate.max_depth,
            min_leaf: r.surrogate.min_leaf,
        }
    }
}

impl ShapReport {
    pub fn new(model: &str, domain: &str, series: Vec<SeriesShap>) -> Result<Self, ExplainError> {
        let pooled = pool_explanations(series.iter().map(|s| &s.explanation))?;
        Ok(Self {
            model: model.into(),
            domain: domain.into(),
            global: global_shap(&pooled)?,
            series,
        })
    }

    pub fn pooled(&self) -> Result<ShapExplanation, ExplainError> {
        pool_explanations(self.series.iter().map(|s| &s.explanation))
    }

    pub fn file_name(&self) -> String {
        format!("shap_{}_{}.json", sanitize(&self.model), sanitize(&self.domain))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, ExplainError> {
        write_json(dir, &self.file_name(), self)
    }
}

/// Keeps file names portable: anything but `[A-Za-z0-9._-]` becomes `_`.
pub fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, ExplainError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}
