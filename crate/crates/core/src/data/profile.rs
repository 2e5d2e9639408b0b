use std::fmt;

use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Finance,
    Power,
    Pedestrian,
    Car,
    Custom,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Domain::Finance => "finance",
            Domain::Power => "power",
            Domain::Pedestrian => "pedestrian",
            Domain::Car => "car",
            Domain::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillPolicy {
    ForwardFill,
    ZeroFill,
}

/// How a windowed model covers the test period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InferenceMode {
    /// Predictions are appended to the context and fed back.
    Autoregressive,
    /// Each block is predicted from a context of observed values only.
    Direct,
}

/// Per-domain protocol constants: context length, horizon, seasonal period,
/// gap fill policy and ARIMA rolling window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainProfile {
    pub name: Domain,
    pub context: usize,
    pub horizon: usize,
    pub seasonal_period: usize,
    pub fill: FillPolicy,
    pub arima_rolling_window: usize,
    pub inference: InferenceMode,
}

impl DomainProfile {
    /// 4 weeks of business days predicting one week ahead.
    pub fn finance() -> Self {
        Self {
            name: Domain::Finance,
            context: 20,
            horizon: 5,
            seasonal_period: 5,
            fill: FillPolicy::ForwardFill,
            arima_rolling_window: 7,
            inference: InferenceMode::Autoregressive,
        }
    }

    /// One day of minutely readings predicting six hours ahead.
    pub fn power() -> Self {
        Self {
            name: Domain::Power,
            context: 1440,
            horizon: 360,
            seasonal_period: 1440,
            fill: FillPolicy::ForwardFill,
            arima_rolling_window: 1440,
            inference: InferenceMode::Autoregressive,
        }
    }

    /// Three days of hourly counts predicting 18 hours ahead.
    pub fn pedestrian() -> Self {
        Self {
            name: Domain::Pedestrian,
            context: 72,
            horizon: 18,
            seasonal_period: 24,
            fill: FillPolicy::ForwardFill,
            arima_rolling_window: 72,
            inference: InferenceMode::Autoregressive,
        }
    }

    /// Eight months of sparse sales predicting two months ahead.
    pub fn car() -> Self {
        Self {
            name: Domain::Car,
            context: 8,
            horizon: 2,
            seasonal_period: 1,
            fill: FillPolicy::ZeroFill,
            arima_rolling_window: 8,
            inference: InferenceMode::Autoregressive,
        }
    }

    pub fn custom(context: usize, horizon: usize, seasonal_period: usize) -> Self {
        Self {
            name: Domain::Custom,
            context,
            horizon,
            seasonal_period,
            fill: FillPolicy::ForwardFill,
            arima_rolling_window: context,
            inference: InferenceMode::Autoregressive,
        }
    }

    /// The built-in profile for a domain; `Custom` yields a 1-step, s=1 profile.
    pub fn builtin(domain: Domain) -> Self {
        match domain {
            Domain::Finance => Self::finance(),
            Domain::Power => Self::power(),
            Domain::Pedestrian => Self::pedestrian(),
            Domain::Car => Self::car(),
            Domain::Custom => Self::custom(1, 1, 1),
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let fields = [
            ("context", self.context),
            ("horizon", self.horizon),
            ("seasonal_period", self.seasonal_period),
            ("arima_rolling_window", self.arima_rolling_window),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(DataError::BadProfile(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}
