//! Deterministic feature engineering for the gradient-boosting forecaster and
//! the SHAP surrogate.
//!
//! Every feature of the row whose target is `x_t` is computed from
//! `x_0..x_{t-1}` plus the (known in advance) timestamp of `t`, so rows never
//! leak the value they are predicting. Batch construction and incremental
//! roll-forward share one code path ([`FeatureState`]) and are therefore
//! bit-identical.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use chrono::{DateTime, Datelike, Timelike, Utc, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Domain, Freq, TimeSeries};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("series of length {have} is too short for the feature spec (needs > {needed})")]
    SpecInfeasible { needed: usize, have: usize },
    #[error("invalid feature spec: {0}")]
    BadSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpandingStat {
    Mean,
    Std,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CalendarFeature {
    Hour,
    DayOfWeek,
    Month,
    WeekendFlag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainExtra {
    /// `ln(x_{t-1} / x_{t-2})`, 0 when either value is non-positive.
    LogReturn,
    /// Population std of the last `window` log-returns.
    Volatility { window: usize },
    /// 1 when the previous observation is exactly zero.
    ZeroIndicator,
    /// `x_{t-1} - x_{t-7}`.
    DiffLastVsLag7,
}

/// Which features to build. Sets are ordered so the spec serialises
/// deterministically and the column order is canonical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    #[serde(default)]
    pub lags: BTreeSet<usize>,
    #[serde(default)]
    pub rolling_means: BTreeSet<usize>,
    #[serde(default)]
    pub expanding: BTreeSet<ExpandingStat>,
    /// Number of Fourier (sin, cos) pairs.
    #[serde(default)]
    pub fourier_k: usize,
    /// Period `s` used by the Fourier terms.
    #[serde(default = "one")]
    pub fourier_period: usize,
    #[serde(default)]
    pub calendar: BTreeSet<CalendarFeature>,
    #[serde(default)]
    pub extras: BTreeSet<DomainExtra>,
}

fn one() -> usize {
    1
}

impl Default for FeatureSpec {
    fn default() -> Self {
        Self {
            lags: BTreeSet::new(),
            rolling_means: BTreeSet::new(),
            expanding: BTreeSet::new(),
            fourier_k: 0,
            fourier_period: 1,
            calendar: BTreeSet::new(),
            extras: BTreeSet::new(),
        }
    }
}

impl FeatureSpec {
    pub fn with_lags(mut self, lags: impl IntoIterator<Item = usize>) -> Self {
        self.lags.extend(lags);
        self
    }

    pub fn with_rolling_means(mut self, windows: impl IntoIterator<Item = usize>) -> Self {
        self.rolling_means.extend(windows);
        self
    }

    pub fn with_expanding(mut self, stats: impl IntoIterator<Item = ExpandingStat>) -> Self {
        self.expanding.extend(stats);
        self
    }

    pub fn with_fourier(mut self, k: usize, period: usize) -> Self {
        self.fourier_k = k;
        self.fourier_period = period;
        self
    }

    pub fn with_calendar(mut self, cal: impl IntoIterator<Item = CalendarFeature>) -> Self {
        self.calendar.extend(cal);
        self
    }

    pub fn with_extras(mut self, extras: impl IntoIterator<Item = DomainExtra>) -> Self {
        self.extras.extend(extras);
        self
    }

    /// Reconstructed per-domain presets for the gradient-boosting forecaster.
    pub fn preset(domain: Domain, seasonal_period: usize) -> Self {
        use CalendarFeature::*;
        match domain {
            Domain::Finance => Self::default()
                .with_lags(1..=5)
                .with_rolling_means([5])
                .with_calendar([DayOfWeek, Month])
                .with_extras([DomainExtra::LogReturn, DomainExtra::Volatility { window: 5 }]),
            Domain::Power => Self::default()
                .with_lags([1, 30])
                .with_rolling_means([60])
                .with_fourier(3, seasonal_period)
                .with_calendar([Hour]),
            Domain::Pedestrian => Self::default()
                .with_lags([1, 24, 168])
                .with_rolling_means([24])
                .with_fourier(3, seasonal_period)
                .with_calendar([Hour, DayOfWeek, WeekendFlag]),
            Domain::Car => Self::default()
                .with_lags([1, 2])
                .with_rolling_means([3])
                .with_expanding([ExpandingStat::Mean])
                .with_calendar([Month])
                .with_extras([DomainExtra::ZeroIndicator]),
            Domain::Custom => {
                let s = seasonal_period.max(1);
                let mut spec = Self::default().with_lags([1, 2, 3]).with_rolling_means([s.max(2)]);
                if s > 1 {
                    spec = spec.with_lags([s]).with_fourier(3, s);
                }
                spec
            }
        }
    }

    /// Statistics-only spec for black-box surrogates: lags 1-7 (plus `s`),
    /// expanding mean/std, rolling means over `{s/2, s, 2s}` and the
    /// last-vs-lag-7 difference. No domain-specific features.
    pub fn surrogate_default(seasonal_period: usize) -> Self {
        let s = seasonal_period.max(1);
        let windows: Vec<usize> = [s / 2, s, 2 * s].into_iter().filter(|w| *w >= 2).collect();
        let mut spec = Self::default()
            .with_lags(1..=7)
            .with_expanding([ExpandingStat::Mean, ExpandingStat::Std])
            .with_rolling_means(windows)
            .with_extras([DomainExtra::DiffLastVsLag7]);
        if s > 1 {
            spec.lags.insert(s);
        }
        spec
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.lags.contains(&0) {
            return Err(FeatureError::BadSpec("lags must be >= 1".into()));
        }
        if self.rolling_means.contains(&0) {
            return Err(FeatureError::BadSpec("rolling windows must be >= 1".into()));
        }
        if self.fourier_k > 0 && self.fourier_period == 0 {
            return Err(FeatureError::BadSpec("fourier period must be >= 1".into()));
        }
        if self.extras.contains(&DomainExtra::Volatility { window: 0 }) {
            return Err(FeatureError::BadSpec("volatility window must be >= 1".into()));
        }
        Ok(())
    }

    /// First target index at which every feature is defined.
    pub fn min_history(&self) -> usize {
        let mut need = 0;
        need = need.max(self.lags.iter().copied().max().unwrap_or(0));
        need = need.max(self.rolling_means.iter().copied().max().unwrap_or(0));
        if !self.expanding.is_empty() {
            need = need.max(1);
        }
        for extra in &self.extras {
            need = need.max(match extra {
                DomainExtra::LogReturn => 2,
                DomainExtra::Volatility { window } => window + 1,
                DomainExtra::ZeroIndicator => 1,
                DomainExtra::DiffLastVsLag7 => 7,
            });
        }
        need
    }

    /// Column names in canonical order.
    pub fn names(&self) -> Vec<String> {
        let mut names = Vec::new();
        names.extend(self.lags.iter().map(|k| format!("lag_{k}")));
        names.extend(self.rolling_means.iter().map(|w| format!("rolling_mean_{w}")));
        for stat in &self.expanding {
            names.push(
                match stat {
                    ExpandingStat::Mean => "expanding_mean",
                    ExpandingStat::Std => "expanding_std",
                }
                .to_string(),
            );
        }
        for k in 1..=self.fourier_k {
            names.push(format!("fourier_sin_{k}"));
            names.push(format!("fourier_cos_{k}"));
        }
        for cal in &self.calendar {
            names.push(
                match cal {
                    CalendarFeature::Hour => "hour",
                    CalendarFeature::DayOfWeek => "day_of_week",
                    CalendarFeature::Month => "month",
                    CalendarFeature::WeekendFlag => "weekend",
                }
                .to_string(),
            );
        }
        for extra in &self.extras {
            names.push(match extra {
                DomainExtra::LogReturn => "log_return".to_string(),
                DomainExtra::Volatility { window } => format!("volatility_{window}"),
                DomainExtra::ZeroIndicator => "zero_indicator".to_string(),
                DomainExtra::DiffLastVsLag7 => "diff_last_lag7".to_string(),
            });
        }
        names
    }
}

/// Rows of features with their targets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub target: Vec<f64>,
    /// Series index of each row's target.
    pub row_time_index: Vec<usize>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }
}

/// A single feature row paired with its target.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub features: Vec<f64>,
    pub target: f64,
}

fn log_return(prev: f64, cur: f64) -> f64 {
    if prev > 0.0 && cur > 0.0 {
        (cur / prev).ln()
    } else {
        0.0
    }
}

/// Incremental feature state over a growing history.
///
/// [`FeatureState::row`] gives the features for the *next* index
/// (`history.len()`); [`FeatureState::push`] appends an observation or a
/// prediction.
#[derive(Debug, Clone)]
pub struct FeatureState {
    spec: FeatureSpec,
    start: DateTime<Utc>,
    freq: Freq,
    values: Vec<f64>,
    // Welford accumulators for the expanding statistics.
    count: f64,
    run_mean: f64,
    run_m2: f64,
}

impl FeatureState {
    pub fn new(spec: &FeatureSpec, start: DateTime<Utc>, freq: Freq, history: &[f64]) -> Self {
        let mut state = Self {
            spec: spec.clone(),
            start,
            freq,
            values: Vec::with_capacity(history.len() + 64),
            count: 0.0,
            run_mean: 0.0,
            run_m2: 0.0,
        };
        for &v in history {
            state.push(v);
        }
        state
    }

    pub fn from_series(spec: &FeatureSpec, series: &TimeSeries) -> Self {
        Self::new(spec, series.start(), series.freq(), series.values())
    }

    pub fn history(&self) -> &[f64] {
        &self.values
    }

    pub fn push(&mut self, v: f64) {
        self.values.push(v);
        self.count += 1.0;
        let delta = v - self.run_mean;
        self.run_mean += delta / self.count;
        self.run_m2 += delta * (v - self.run_mean);
    }

    pub fn is_ready(&self) -> bool {
        self.values.len() >= self.spec.min_history()
    }

    /// Features for target index `history.len()`.
    pub fn row(&self) -> Result<Vec<f64>, FeatureError> {
        let t = self.values.len();
        let need = self.spec.min_history();
        if t < need {
            return Err(FeatureError::SpecInfeasible { needed: need, have: t });
        }
        let x = &self.values;
        let spec = &self.spec;
        let mut row = Vec::with_capacity(spec.names().len());
        for &k in &spec.lags {
            row.push(x[t - k]);
        }
        for &w in &spec.rolling_means {
            row.push(x[t - w..t].iter().sum::<f64>() / w as f64);
        }
        for stat in &spec.expanding {
            row.push(match stat {
                ExpandingStat::Mean => self.run_mean,
                ExpandingStat::Std => (self.run_m2 / self.count).max(0.0).sqrt(),
            });
        }
        if spec.fourier_k > 0 {
            let s = spec.fourier_period as f64;
            for k in 1..=spec.fourier_k {
                let arg = 2.0 * PI * k as f64 * t as f64 / s;
                row.push(arg.sin());
                row.push(arg.cos());
            }
        }
        if !spec.calendar.is_empty() {
            let ts = self.freq.timestamp_at(self.start, t);
            for cal in &spec.calendar {
                row.push(match cal {
                    CalendarFeature::Hour => ts.hour() as f64,
                    CalendarFeature::DayOfWeek => ts.weekday().num_days_from_monday() as f64,
                    CalendarFeature::Month => ts.month() as f64,
                    CalendarFeature::WeekendFlag => {
                        f64::from(u8::from(matches!(ts.weekday(), Weekday::Sat | Weekday::Sun)))
                    }
                });
            }
        }
        for extra in &spec.extras {
            row.push(match *extra {
                DomainExtra::LogReturn => log_return(x[t - 2], x[t - 1]),
                DomainExtra::Volatility { window } => {
                    let rets: Vec<f64> = (t - window..t).map(|j| log_return(x[j - 1], x[j])).collect();
                    let m = rets.iter().sum::<f64>() / window as f64;
                    (rets.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / window as f64).sqrt()
                }
                DomainExtra::ZeroIndicator => f64::from(u8::from(x[t - 1] == 0.0)),
                DomainExtra::DiffLastVsLag7 => x[t - 1] - x[t - 7],
            });
        }
        Ok(row)
    }
}

/// Builds one row per index at which every feature is defined.
pub fn build_features(s: &TimeSeries, spec: &FeatureSpec) -> Result<FeatureMatrix, FeatureError> {
    spec.validate()?;
    let first = spec.min_history();
    if s.len() <= first {
        return Err(FeatureError::SpecInfeasible {
            needed: first,
            have: s.len(),
        });
    }
    let values = s.values();
    let mut state = FeatureState::new(spec, s.start(), s.freq(), &values[..first]);
    let mut fm = FeatureMatrix {
        names: spec.names(),
        rows: Vec::with_capacity(values.len() - first),
        target: Vec::with_capacity(values.len() - first),
        row_time_index: Vec::with_capacity(values.len() - first),
    };
    for (t, &v) in values.iter().enumerate().skip(first) {
        fm.rows.push(state.row()?);
        fm.target.push(v);
        fm.row_time_index.push(t);
        state.push(v);
    }
    Ok(fm)
}

/// The row whose target is `new_value` appended after `history`; identical to
/// the last row of `build_features(history ++ [new_value])`.
pub fn roll_forward(history: &TimeSeries, spec: &FeatureSpec, new_value: f64) -> Result<FeatureRow, FeatureError> {
    spec.validate()?;
    let state = FeatureState::from_series(spec, history);
    Ok(FeatureRow {
        features: state.row()?,
        target: new_value,
    })
}
