//! `evaluate`: every (dataset, model, series) cell is fitted on the training
//! split and rolled over the test split; cells run in parallel and failures
//! are collected without stopping the others.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chronoscope_core::data::{DomainProfile, InferenceMode, SplitSeries};
use chronoscope_core::explain::sanitize;
use chronoscope_core::forecast::{
    arima_forecast_rolling, arima_select, FittedModel, Forecaster, GbdtForecaster, ModelDocument, RollingOptions,
};
use chronoscope_core::harness::{
    aggregate, run_autoregressive, run_direct, write_metrics_csv, ForecastRecord, MetricRow,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ModelEntry, RunConfig};
use crate::dataset::{load_datasets, Dataset};
use crate::error::CliError;
use crate::models::{fit, Remotes};
use crate::output::{write_bytes, write_json, write_text};
use crate::{CellFailure, Outcome};

pub const METRICS_CSV: &str = "metrics.csv";
pub const SUMMARY_JSON: &str = "metrics_summary.json";
pub const FORECASTS_JSON: &str = "forecasts.json";

/// Forecast records of one dataset, as stored in `forecasts.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecords {
    pub domain: String,
    pub freq: chronoscope_core::data::Freq,
    pub n_series: usize,
    pub records: Vec<ForecastRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastsFile {
    pub datasets: BTreeMap<String, DatasetRecords>,
}

struct CellOutput {
    record: ForecastRecord,
    row: MetricRow,
    document: Option<ModelDocument>,
}

fn run_cell(ds: &Dataset, split: &SplitSeries, entry: &ModelEntry, remotes: &Remotes) -> Result<CellOutput, String> {
    let profile = &ds.profile;
    let name = entry.name();
    let (mut record, document) = if entry.kind == "arima" {
        let cfg = entry.arima.clone().unwrap_or_default();
        let model = arima_select(split.train.values(), profile, &cfg).map_err(|e| e.to_string())?;
        let options = RollingOptions {
            refit: entry.arima_refit.unwrap_or(false),
        };
        let fc = arima_forecast_rolling(&model, split, profile, options).map_err(|e| e.to_string())?;
        let intervals = fc
            .interval
            .filter(|iv| iv.iter().all(|(a, b)| a.is_finite() && b.is_finite()));
        let record = ForecastRecord::from_points(name, split, fc.point, intervals, split.test.len())
            .map_err(|e| e.to_string())?;
        let doc = ModelDocument::new(split.train.series_id(), FittedModel::Arima { model });
        (record, Some(doc))
    } else if entry.kind == "gbdt" {
        let mut f = GbdtForecaster::new(entry.gbdt.clone().unwrap_or_default(), entry.features.clone());
        f.fit(&split.train, profile).map_err(|e| e.to_string())?;
        let record = roll(&f, split, profile)?;
        let doc = ModelDocument::new(
            split.train.series_id(),
            FittedModel::Gbdt {
                ensemble: f.model.clone().expect("fitted"),
                spec: f.spec.clone().expect("spec set by fit"),
            },
        );
        (record, Some(doc))
    } else {
        let fitted = fit(entry, profile, &split.train, remotes).map_err(|e| e.to_string())?;
        (roll(fitted.as_dyn(), split, profile)?, None)
    };
    record.model_name = name.to_string();
    let seen = entry.seen_in_pretraining.contains(&ds.name);
    let row = MetricRow::score(&ds.name, &record, split.train.values(), profile.seasonal_period, seen)
        .map_err(|e| e.to_string())?;
    Ok(CellOutput { record, row, document })
}

fn roll(model: &dyn Forecaster, split: &SplitSeries, profile: &DomainProfile) -> Result<ForecastRecord, String> {
    match profile.inference {
        InferenceMode::Autoregressive => run_autoregressive(model, split, profile),
        InferenceMode::Direct => run_direct(model, split, profile),
    }
    .map_err(|e| e.to_string())
}

pub fn model_path(dir: &Path, dataset: &str, model: &str, series_id: &str) -> PathBuf {
    dir.join("models")
        .join(sanitize(dataset))
        .join(sanitize(model))
        .join(format!("{}.json", sanitize(series_id)))
}

pub fn evaluate(rc: &RunConfig) -> Result<Outcome, CliError> {
    let datasets = load_datasets(rc)?;
    let remotes = Remotes::connect(rc);
    let cells: Vec<(&Dataset, &SplitSeries, &ModelEntry)> = datasets
        .iter()
        .flat_map(|ds| {
            rc.config
                .models
                .iter()
                .flat_map(move |m| ds.splits.iter().map(move |s| (ds, s, m)))
        })
        .collect();
    log::info!("evaluating {} cells", cells.len());
    let results: Vec<Result<CellOutput, String>> = cells
        .par_iter()
        .map(|(ds, s, m)| run_cell(ds, s, m, &remotes))
        .collect();

    let dir = &rc.config.output.dir;
    let mut outcome = Outcome::default();
    let mut rows = Vec::new();
    let mut files = ForecastsFile {
        datasets: datasets
            .iter()
            .map(|ds| {
                (
                    ds.name.clone(),
                    DatasetRecords {
                        domain: ds.domain.to_string(),
                        freq: ds.freq,
                        n_series: ds.series.len(),
                        records: Vec::new(),
                    },
                )
            })
            .collect(),
    };
    for ((ds, split, entry), result) in cells.iter().zip(results) {
        match result {
            Ok(out) => {
                if rc.config.output.save_models {
                    if let Some(doc) = &out.document {
                        let path = model_path(dir, &ds.name, entry.name(), split.train.series_id());
                        write_bytes(&path, format!("{}\n", doc.to_json()?).as_bytes())?;
                    }
                }
                rows.push(out.row);
                files
                    .datasets
                    .get_mut(&ds.name)
                    .expect("dataset entry")
                    .records
                    .push(out.record);
            }
            Err(error) => {
                log::error!("{} / {} / {}: {error}", ds.name, entry.name(), split.train.series_id());
                outcome.failures.push(CellFailure {
                    stage: "evaluate".into(),
                    dataset: ds.name.clone(),
                    model: entry.name().to_string(),
                    series_id: Some(split.train.series_id().to_string()),
                    error,
                });
            }
        }
    }
    for d in files.datasets.values_mut() {
        d.records
            .sort_by(|a, b| (&a.model_name, &a.series_id).cmp(&(&b.model_name, &b.series_id)));
    }

    let table = aggregate(rows);
    let mut csv = Vec::new();
    write_metrics_csv(&mut csv, &table).map_err(chronoscope_core::Error::from)?;
    outcome.written.push(write_bytes(&dir.join(METRICS_CSV), &csv)?);
    let summary = serde_json::json!({
        "summary": table.summary,
        "failures": outcome.failures,
    });
    outcome
        .written
        .push(write_json(&dir.join(SUMMARY_JSON), &summary, Some(&rc.document))?);
    outcome
        .written
        .push(write_json(&dir.join(FORECASTS_JSON), &files, Some(&rc.document))?);
    outcome
        .written
        .push(write_text(&dir.join("metrics_table.md"), &markdown_table(&table))?);
    Ok(outcome)
}

/// Domain-by-model table of `mean ± std` MASE and sMAPE.
fn markdown_table(table: &chronoscope_core::harness::MetricTable) -> String {
    let mut s = String::from("| Domain | Model | Series | MASE | sMAPE |\n|---|---|---|---|---|\n");
    for (domain, models) in &table.summary {
        for (model, cell) in models {
            s.push_str(&format!(
                "| {domain} | {model}{} | {} | {} | {} |\n",
                if cell.seen_in_pretraining { " *" } else { "" },
                cell.n_series,
                cell.mase.display(),
                cell.smape.display()
            ));
        }
    }
    s
}

/// Reads `forecasts.json` written by [`evaluate`].
pub fn read_forecasts(dir: &Path) -> Result<ForecastsFile, CliError> {
    let path = dir.join(FORECASTS_JSON);
    if !path.exists() {
        return Err(CliError::MissingInput(format!(
            "{} not found; run `chronoscope evaluate` with the same config first",
            path.display()
        )));
    }
    let mut v = crate::output::read_json(&path)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.remove("config");
    }
    Ok(serde_json::from_value(v)?)
}

/// The fitted GBDT for a cell: the stored document when present, else a fresh fit.
pub fn load_or_fit_gbdt(
    rc: &RunConfig,
    ds: &Dataset,
    entry: &ModelEntry,
    split: &SplitSeries,
) -> Result<
    (
        chronoscope_core::forecast::TreeEnsemble,
        chronoscope_core::features::FeatureSpec,
    ),
    String,
> {
    let path = model_path(&rc.config.output.dir, &ds.name, entry.name(), split.train.series_id());
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(ModelDocument {
            model: FittedModel::Gbdt { ensemble, spec },
            ..
        }) = ModelDocument::from_json(&text)
        {
            return Ok((ensemble, spec));
        }
        log::warn!("ignoring unreadable model document {}", path.display());
    }
    let mut f = GbdtForecaster::new(entry.gbdt.clone().unwrap_or_default(), entry.features.clone());
    f.fit(&split.train, &ds.profile).map_err(|e| e.to_string())?;
    Ok((f.model.expect("fitted"), f.spec.expect("spec set by fit")))
}
