//! Turns model entries into fitted forecasters.

use std::collections::BTreeMap;

use chronoscope_core::adapter::RemoteForecaster;
use chronoscope_core::data::{DomainProfile, TimeSeries};
use chronoscope_core::forecast::{
    ArimaForecaster, ContextPolicy, ForecastError, Forecaster, GbdtForecaster, SeasonalNaive,
};

use crate::config::{ModelEntry, RunConfig};

/// Remote forecasters are shared by every series; native ones are fitted per series.
pub struct Remotes(BTreeMap<String, RemoteForecaster>);

impl Remotes {
    pub fn connect(rc: &RunConfig) -> Self {
        let map = rc
            .endpoints
            .iter()
            .map(|(name, endpoint)| {
                let entry = rc.model(name).expect("endpoint belongs to a model");
                let f = RemoteForecaster::new(name.clone(), endpoint.connect(rc.config.seed))
                    .with_timeout(entry.timeout())
                    .with_scaling_hint(entry.scaling_hint.unwrap_or_default());
                (name.clone(), f)
            })
            .collect();
        Self(map)
    }

    pub fn get(&self, name: &str) -> Option<&RemoteForecaster> {
        self.0.get(name)
    }
}

pub enum Fitted<'a> {
    Owned(Box<dyn Forecaster>),
    Shared(&'a RemoteForecaster),
}

impl Fitted<'_> {
    pub fn as_dyn(&self) -> &dyn Forecaster {
        match self {
            Fitted::Owned(f) => f.as_ref(),
            Fitted::Shared(f) => *f,
        }
    }

    /// Whether the model may be queried from several threads at once.
    pub fn concurrency_safe(&self) -> bool {
        match self {
            Fitted::Owned(_) => true,
            Fitted::Shared(f) => f.concurrency_safe(),
        }
    }
}

/// Fits `entry` on `train`.
pub fn fit<'a>(
    entry: &ModelEntry,
    profile: &DomainProfile,
    train: &TimeSeries,
    remotes: &'a Remotes,
) -> Result<Fitted<'a>, ForecastError> {
    let mut model: Box<dyn Forecaster> = match entry.kind.as_str() {
        "arima" => Box::new(ArimaForecaster::new(entry.arima.clone().unwrap_or_default())),
        "gbdt" => Box::new(GbdtForecaster::new(
            entry.gbdt.clone().unwrap_or_default(),
            entry.features.clone(),
        )),
        "seasonal-naive" => Box::new(SeasonalNaive::default()),
        "remote" => {
            return remotes
                .get(entry.name())
                .map(Fitted::Shared)
                .ok_or_else(|| ForecastError::Remote(format!("no endpoint for {}", entry.name())))
        }
        other => unreachable!("model kind '{other}' passed validation"),
    };
    model.fit(train, profile)?;
    Ok(Fitted::Owned(model))
}

/// The input a model expects for a context window taken from `train`:
/// the window alone, or the training history up to the window followed by it.
pub fn model_input(
    model: &dyn Forecaster,
    train: &TimeSeries,
    window_start: usize,
    window: &[f64],
) -> Result<TimeSeries, ForecastError> {
    let (start, values) = match model.context_policy() {
        ContextPolicy::Window => (window_start, window.to_vec()),
        ContextPolicy::FullHistory => {
            let mut v = train.values()[..window_start].to_vec();
            v.extend_from_slice(window);
            (0, v)
        }
    };
    TimeSeries::new(
        train.series_id(),
        train.freq().timestamp_at(train.start(), start),
        train.freq(),
        values,
    )
    .map_err(|e| ForecastError::Remote(e.to_string()))
}

/// Index of `ctx`'s first timestamp in `train`, if it lies on the same grid.
pub fn offset_in(train: &TimeSeries, ctx: &TimeSeries) -> Option<usize> {
    let target = ctx.start();
    let (mut lo, mut hi) = (0usize, train.len());
    while lo < hi {
        let mid = (lo + hi) / 2;
        if train.timestamp(mid) < target {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    (lo < train.len() && train.timestamp(lo) == target).then_some(lo)
}
