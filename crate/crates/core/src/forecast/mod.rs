//! The forecaster contract and the native forecasters: seasonal naive, ARIMA
//! and gradient-boosted trees.

pub mod arima;
mod document;
pub mod gbdt;
mod likelihood;
pub(crate) mod optim;

pub use arima::{arima_forecast_rolling, arima_select, ArimaConfig, ArimaForecaster, ArimaModel, RollingOptions};
pub use document::{FittedModel, ModelDocument};
pub use gbdt::{
    gbdt_fit, gbdt_forecast_iterative, GbdtForecaster, GbdtParams, Loss, Node, RegressionTree, TreeEnsemble,
    MODEL_FORMAT_VERSION,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DomainProfile, TimeSeries};
use crate::features::FeatureError;
use crate::statkit::StatError;

#[derive(Debug, Error, PartialEq)]
pub enum ForecastError {
    #[error("context too short: need {needed}, have {have}")]
    TooShort { needed: usize, have: usize },
    #[error("model {0} has not been fitted")]
    NotFitted(String),
    #[error("no ARIMA candidate converged")]
    NoConvergedCandidate,
    #[error("empty feature matrix")]
    EmptyFeatures,
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error("remote forecaster failed: {0}")]
    Remote(String),
    #[error("unsupported model document: {0}")]
    BadModel(String),
}

/// Point forecasts with optional symmetric 95% intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forecast {
    pub point: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interval: Option<Vec<(f64, f64)>>,
}

impl Forecast {
    pub fn point(point: Vec<f64>) -> Self {
        Self { point, interval: None }
    }
}

/// How much history a forecaster receives at prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContextPolicy {
    /// The whole observed (and, autoregressively, predicted) history.
    FullHistory,
    /// Only the last `profile.context` values.
    Window,
}

/// Common fit/predict contract. `predict` is deterministic given the fitted
/// state and the context, and `fit` only ever sees training data.
pub trait Forecaster: Send + Sync {
    fn name(&self) -> &str;

    fn fit(&mut self, train: &TimeSeries, profile: &DomainProfile) -> Result<(), ForecastError>;

    /// Forecasts `horizon` steps after the end of `context`.
    fn predict(&self, context: &TimeSeries, horizon: usize) -> Result<Forecast, ForecastError>;

    fn context_policy(&self) -> ContextPolicy {
        ContextPolicy::Window
    }
}

/// Repeats the last observed season: `y_{n+k} = context[n - s + ((k-1) mod s)]`.
pub fn seasonal_naive(context: &[f64], horizon: usize, period: usize) -> Result<Vec<f64>, ForecastError> {
    let s = period.max(1);
    if context.len() < s {
        return Err(ForecastError::TooShort {
            needed: s,
            have: context.len(),
        });
    }
    let season = &context[context.len() - s..];
    Ok((0..horizon).map(|k| season[k % s]).collect())
}

/// Seasonal-naive baseline as a [`Forecaster`]; the period comes from the profile.
#[derive(Debug, Clone, Default)]
pub struct SeasonalNaive {
    period: Option<usize>,
}

impl SeasonalNaive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_period(period: usize) -> Self {
        Self { period: Some(period) }
    }
}

impl Forecaster for SeasonalNaive {
    fn name(&self) -> &str {
        "naive"
    }

    fn fit(&mut self, _train: &TimeSeries, profile: &DomainProfile) -> Result<(), ForecastError> {
        if self.period.is_none() {
            self.period = Some(profile.seasonal_period);
        }
        Ok(())
    }

    fn predict(&self, context: &TimeSeries, horizon: usize) -> Result<Forecast, ForecastError> {
        let s = self.period.ok_or_else(|| ForecastError::NotFitted("naive".into()))?;
        seasonal_naive(context.values(), horizon, s).map(Forecast::point)
    }

    fn context_policy(&self) -> ContextPolicy {
        ContextPolicy::FullHistory
    }
}
