//! Rolling-origin evaluation: autoregressive and direct rollouts over the
//! test segment, sMAPE/MASE, and per-domain aggregation.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{format_timestamp, tile_blocks, DataError, DomainProfile, SplitSeries, TimeSeries};
use crate::forecast::{ContextPolicy, ForecastError, Forecaster};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("training segment too short for seasonal period: need > {needed}, have {have}")]
    TrainTooShort { needed: usize, have: usize },
    #[error("no values to score")]
    Empty,
    #[error("model {model} returned {got} points, expected at least {want}")]
    ShortForecast { model: String, got: usize, want: usize },
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Forecasts aligned one-to-one with a test segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub series_id: String,
    pub model_name: String,
    pub timestamps: Vec<String>,
    pub y_true: Vec<f64>,
    pub y_pred: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervals: Option<Vec<(f64, f64)>>,
    /// Number of `predict` calls made.
    pub n_calls: usize,
}

impl ForecastRecord {
    /// Record for forecasts produced outside the block rollout (e.g. rolling ARIMA).
    pub fn from_points(
        model_name: &str,
        split: &SplitSeries,
        y_pred: Vec<f64>,
        intervals: Option<Vec<(f64, f64)>>,
        n_calls: usize,
    ) -> Result<Self, HarnessError> {
        if y_pred.len() != split.test.len() {
            return Err(HarnessError::LengthMismatch(split.test.len(), y_pred.len()));
        }
        Ok(Self {
            series_id: split.test.series_id().to_string(),
            model_name: model_name.to_string(),
            timestamps: test_timestamps(split),
            y_true: split.test.values().to_vec(),
            y_pred,
            intervals,
            n_calls,
        })
    }
}

fn test_timestamps(split: &SplitSeries) -> Vec<String> {
    let freq = split.test.freq();
    split
        .test
        .timestamps()
        .into_iter()
        .map(|t| format_timestamp(t, freq))
        .collect()
}

/// Context handed to the model: the whole history or its last `C` values,
/// timestamped consistently with the original series.
fn make_context(
    split: &SplitSeries,
    history: &[f64],
    policy: ContextPolicy,
    context_len: usize,
) -> Result<TimeSeries, HarnessError> {
    let from = match policy {
        ContextPolicy::FullHistory => 0,
        ContextPolicy::Window => history.len().saturating_sub(context_len),
    };
    let train = &split.train;
    let start = train.freq().timestamp_at(train.start(), from);
    Ok(TimeSeries::new(
        train.series_id(),
        start,
        train.freq(),
        history[from..].to_vec(),
    )?)
}

fn rollout(
    model: &dyn Forecaster,
    split: &SplitSeries,
    profile: &DomainProfile,
    feed_truth: bool,
) -> Result<ForecastRecord, HarnessError> {
    let tiling = tile_blocks(split.test.len(), profile.horizon);
    let truth = split.test.values();
    let mut history = split.train.values().to_vec();
    let mut y_pred = Vec::with_capacity(truth.len());
    let mut intervals = Some(Vec::with_capacity(truth.len()));
    for block in &tiling.blocks {
        let ctx = make_context(split, &history, model.context_policy(), profile.context)?;
        let fc = model.predict(&ctx, block.len())?;
        if fc.point.len() < block.len() {
            return Err(HarnessError::ShortForecast {
                model: model.name().to_string(),
                got: fc.point.len(),
                want: block.len(),
            });
        }
        let pts = &fc.point[..block.len()];
        y_pred.extend_from_slice(pts);
        intervals = match (intervals, fc.interval) {
            (Some(mut acc), Some(iv)) if iv.len() >= block.len() => {
                acc.extend_from_slice(&iv[..block.len()]);
                Some(acc)
            }
            _ => None,
        };
        if feed_truth {
            history.extend_from_slice(&truth[block.clone()]);
        } else {
            history.extend_from_slice(pts);
        }
    }
    ForecastRecord::from_points(model.name(), split, y_pred, intervals, tiling.blocks.len())
}

/// Predicts `H` steps, appends the predictions to the context and repeats
/// until the test segment is covered; the last block is truncated.
pub fn run_autoregressive(
    model: &dyn Forecaster,
    split: &SplitSeries,
    profile: &DomainProfile,
) -> Result<ForecastRecord, HarnessError> {
    rollout(model, split, profile, false)
}

/// Predicts each `H`-block in one shot from observed history; true values
/// (never predictions) refill the context between blocks.
pub fn run_direct(
    model: &dyn Forecaster,
    split: &SplitSeries,
    profile: &DomainProfile,
) -> Result<ForecastRecord, HarnessError> {
    rollout(model, split, profile, true)
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<(), HarnessError> {
    if a.len() != b.len() {
        return Err(HarnessError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(HarnessError::Empty);
    }
    Ok(())
}

/// Symmetric MAPE in percent; a term with `|x| + |x_hat| = 0` contributes 0.
pub fn smape(y_true: &[f64], y_pred: &[f64]) -> Result<f64, HarnessError> {
    check_lengths(y_true, y_pred)?;
    let total: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(x, p)| {
            let den = (x.abs() + p.abs()) / 2.0;
            if den == 0.0 {
                0.0
            } else {
                (x - p).abs() / den
            }
        })
        .sum();
    Ok(100.0 * total / y_true.len() as f64)
}

/// Test MAE over the in-sample seasonal-naive MAE of `train`. A zero
/// denominator gives `+inf`.
pub fn mase(y_true: &[f64], y_pred: &[f64], train: &[f64], period: usize) -> Result<f64, HarnessError> {
    check_lengths(y_true, y_pred)?;
    let s = period.max(1);
    if train.len() <= s {
        return Err(HarnessError::TrainTooShort {
            needed: s,
            have: train.len(),
        });
    }
    let num = y_true.iter().zip(y_pred).map(|(x, p)| (x - p).abs()).sum::<f64>() / y_true.len() as f64;
    let den = (s..train.len()).map(|t| (train[t] - train[t - s]).abs()).sum::<f64>() / (train.len() - s) as f64;
    if den == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(num / den)
}

pub const FLAG_MASE_INFINITE: &str = "mase-infinite";
pub const FLAG_SEEN_IN_PRETRAINING: &str = "seen-in-pretraining";

/// Per-series scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub domain: String,
    pub model: String,
    pub series_id: String,
    pub mase: f64,
    pub smape: f64,
    pub flags: Vec<String>,
}

impl MetricRow {
    pub fn score(
        domain: &str,
        record: &ForecastRecord,
        train: &[f64],
        period: usize,
        seen_in_pretraining: bool,
    ) -> Result<Self, HarnessError> {
        let mase = mase(&record.y_true, &record.y_pred, train, period)?;
        let smape = smape(&record.y_true, &record.y_pred)?;
        let mut flags = Vec::new();
        if mase.is_infinite() {
            flags.push(FLAG_MASE_INFINITE.to_string());
        }
        if seen_in_pretraining {
            flags.push(FLAG_SEEN_IN_PRETRAINING.to_string());
        }
        Ok(Self {
            domain: domain.to_string(),
            model: record.model_name.clone(),
            series_id: record.series_id.clone(),
            mase,
            smape,
            flags,
        })
    }
}

/// Mean and population std over the finite values; infinite ones are counted apart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub n_finite: usize,
    pub n_infinite: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let n_infinite = values.len() - finite.len();
        if finite.is_empty() {
            return Self {
                mean: None,
                std: None,
                n_finite: 0,
                n_infinite,
            };
        }
        Self {
            mean: Some(crate::statkit::mean(&finite)),
            std: Some(crate::statkit::population_std(&finite)),
            n_finite: finite.len(),
            n_infinite,
        }
    }

    /// `mean ± std`, or `∞` when nothing finite remains.
    pub fn display(&self) -> String {
        match (self.mean, self.std) {
            (Some(m), Some(s)) if self.n_infinite == 0 => format!("{m:.2} ± {s:.2}"),
            (Some(m), Some(s)) => format!("{m:.2} ± {s:.2} (∞×{})", self.n_infinite),
            _ => "∞".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub n_series: usize,
    pub mase: MeanStd,
    pub smape: MeanStd,
    pub seen_in_pretraining: bool,
}

/// Per-series rows plus `domain -> model -> summary`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub rows: Vec<MetricRow>,
    pub summary: BTreeMap<String, BTreeMap<String, SummaryCell>>,
}

/// Sorts rows by (domain, model, series) and summarizes each (domain, model).
pub fn aggregate(mut rows: Vec<MetricRow>) -> MetricTable {
    rows.sort_by(|a, b| (&a.domain, &a.model, &a.series_id).cmp(&(&b.domain, &b.model, &b.series_id)));
    let mut groups: BTreeMap<(String, String), Vec<&MetricRow>> = BTreeMap::new();
    for r in &rows {
        groups.entry((r.domain.clone(), r.model.clone())).or_default().push(r);
    }
    let mut summary: BTreeMap<String, BTreeMap<String, SummaryCell>> = BTreeMap::new();
    for ((domain, model), group) in groups {
        let m: Vec<f64> = group.iter().map(|r| r.mase).collect();
        let s: Vec<f64> = group.iter().map(|r| r.smape).collect();
        let cell = SummaryCell {
            n_series: group.len(),
            mase: MeanStd::of(&m),
            smape: MeanStd::of(&s),
            seen_in_pretraining: group
                .iter()
                .any(|r| r.flags.iter().any(|f| f == FLAG_SEEN_IN_PRETRAINING)),
        };
        summary.entry(domain).or_default().insert(model, cell);
    }
    MetricTable { rows, summary }
}

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        v.to_string()
    }
}

/// `domain,model,series_id,mase,smape,flags` with `;`-joined flags.
pub fn write_metrics_csv<W: Write>(w: W, table: &MetricTable) -> Result<(), HarnessError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["domain", "model", "series_id", "mase", "smape", "flags"])?;
    for r in &table.rows {
        out.write_record([
            r.domain.as_str(),
            r.model.as_str(),
            r.series_id.as_str(),
            &fmt_metric(r.mase),
            &fmt_metric(r.smape),
            &r.flags.join(";"),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Summary document; `config` is embedded verbatim when given.
pub fn write_summary_json<W: Write>(
    mut w: W,
    table: &MetricTable,
    config: Option<&serde_json::Value>,
) -> Result<(), HarnessError> {
    let doc = serde_json::json!({
        "config": config,
        "summary": table.summary,
    });
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    Ok(())
}
