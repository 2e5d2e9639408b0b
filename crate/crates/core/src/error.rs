use thiserror::Error;

use crate::adapter::AdapterError;
use crate::data::DataError;
use crate::explain::ExplainError;
use crate::features::FeatureError;
use crate::forecast::ForecastError;
use crate::harness::HarnessError;
use crate::rde::RdeError;
use crate::statkit::StatError;

/// Crate-wide error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error(transparent)]
    Rde(#[from] RdeError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
