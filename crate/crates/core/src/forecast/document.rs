//! Versioned JSON document for fitted models, shared with the explainers.

use serde::{Deserialize, Serialize};

use super::arima::ArimaModel;
use super::gbdt::{TreeEnsemble, MODEL_FORMAT_VERSION};
use super::ForecastError;
use crate::features::FeatureSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FittedModel {
    Arima { model: ArimaModel },
    Gbdt { ensemble: TreeEnsemble, spec: FeatureSpec },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub series_id: String,
    #[serde(flatten)]
    pub model: FittedModel,
}

impl ModelDocument {
    pub fn new(series_id: impl Into<String>, model: FittedModel) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            series_id: series_id.into(),
            model,
        }
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    /// Parses and validates the version and, for tree models, the node graph.
    pub fn from_json(s: &str) -> Result<Self, ForecastError> {
        let doc: Self = serde_json::from_str(s).map_err(|e| ForecastError::BadModel(e.to_string()))?;
        if doc.format_version != MODEL_FORMAT_VERSION {
            return Err(ForecastError::BadModel(format!(
                "document version {} (expected {MODEL_FORMAT_VERSION})",
                doc.format_version
            )));
        }
        if let FittedModel::Gbdt { ensemble, .. } = &doc.model {
            TreeEnsemble::from_json(&ensemble.to_json().map_err(|e| ForecastError::BadModel(e.to_string()))?)?;
        }
        Ok(doc)
    }
}
