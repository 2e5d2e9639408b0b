//! `explain-lime`, `explain-shap` and `surrogate`.

use std::collections::BTreeMap;

use chronoscope_core::data::{SplitSeries, TimeSeries};
use chronoscope_core::explain::{
    fit_surrogate, lime_explain, sanitize, tree_shap, LimeReport, SeriesShap, ShapReport, SurrogateConfig,
    SurrogateReport,
};
use chronoscope_core::features::build_features;
use chronoscope_core::forecast::{ForecastError, Forecaster};
use chronoscope_core::plot::{lime_svg, shap_beeswarm_svg};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ModelEntry, RunConfig};
use crate::dataset::{load_datasets, Dataset};
use crate::error::CliError;
use crate::evaluate::load_or_fit_gbdt;
use crate::models::{fit, model_input, offset_in, Remotes};
use crate::output::{write_bytes, write_json, write_text};
use crate::{CellFailure, Outcome};

/// Additivity tolerance for TreeSHAP rows, relative to the prediction scale.
const ADDITIVITY_TOL: f64 = 1e-9;

fn selected<'a>(datasets: &'a [Dataset], names: &Option<Vec<String>>) -> Vec<&'a Dataset> {
    datasets
        .iter()
        .filter(|d| names.as_ref().is_none_or(|n| n.contains(&d.name)))
        .collect()
}

fn failure(stage: &str, ds: &str, model: &str, series: Option<&str>, error: impl ToString) -> CellFailure {
    CellFailure {
        stage: stage.into(),
        dataset: ds.into(),
        model: model.into(),
        series_id: series.map(str::to_string),
        error: error.to_string(),
    }
}

fn lime_model(rc: &RunConfig) -> &ModelEntry {
    match &rc.config.explain.lime.model {
        Some(name) => rc.model(name).expect("validated model name"),
        None => rc
            .config
            .models
            .iter()
            .find(|m| m.kind == "arima")
            .unwrap_or(&rc.config.models[0]),
    }
}

fn lime_series(
    ds: &Dataset,
    split: &SplitSeries,
    entry: &ModelEntry,
    rc: &RunConfig,
    remotes: &Remotes,
) -> Result<LimeReport, String> {
    let fitted = fit(entry, &ds.profile, &split.train, remotes).map_err(|e| e.to_string())?;
    let model = fitted.as_dyn();
    let train = &split.train;
    let c = ds.profile.context.min(train.len());
    let start = train.len() - c;
    let context = train.values()[start..].to_vec();
    let mut cfg = rc.config.explain.lime.config.clone();
    cfg.seed = rc.config.seed;
    cfg.serial = cfg.serial || !fitted.concurrency_safe();
    let requested = cfg.n_segments;
    cfg.n_segments = cfg.n_segments.min(c);
    cfg.n_samples = cfg.n_samples.max(cfg.n_segments);
    let horizon = ds.profile.horizon;
    let predict = |window: &[f64]| -> Result<Vec<f64>, ForecastError> {
        let input = model_input(model, train, start, window)?;
        model.predict(&input, horizon).map(|f| f.point)
    };
    let attribution = lime_explain(predict, &context, &cfg).map_err(|e| e.to_string())?;
    let mut report = LimeReport::new(train.series_id(), entry.name(), context, cfg.clone(), attribution);
    if requested != cfg.n_segments {
        report.metadata.insert(
            "n_segments_clamped".into(),
            format!("{requested} requested, context has {c} values"),
        );
    }
    Ok(report)
}

pub fn explain_lime(rc: &RunConfig) -> Result<Outcome, CliError> {
    let datasets = load_datasets(rc)?;
    let remotes = Remotes::connect(rc);
    let entry = lime_model(rc);
    let section = &rc.config.explain.lime;
    let dir = &rc.config.output.dir;
    let mut outcome = Outcome::default();
    for ds in selected(&datasets, &section.datasets) {
        let splits: Vec<&SplitSeries> = ds
            .splits
            .iter()
            .take(section.max_series.unwrap_or(usize::MAX))
            .collect();
        let results: Vec<Result<LimeReport, String>> = splits
            .par_iter()
            .map(|s| lime_series(ds, s, entry, rc, &remotes))
            .collect();
        for (split, result) in splits.iter().zip(results) {
            let id = split.train.series_id();
            match result {
                Ok(report) => {
                    let stem = format!("lime_{}", sanitize(id));
                    outcome.written.push(write_json(
                        &dir.join(format!("{stem}.json")),
                        &report,
                        Some(&rc.document),
                    )?);
                    let title = format!("{} / {} ({})", ds.name, id, entry.name());
                    let svg = lime_svg(&title, &report.context, &report.attribution);
                    outcome
                        .written
                        .push(write_text(&dir.join(format!("{stem}.svg")), &svg)?);
                }
                Err(e) => outcome
                    .failures
                    .push(failure("explain-lime", &ds.name, entry.name(), Some(id), e)),
            }
        }
    }
    Ok(outcome)
}

/// A black box over `train` windows for [`fit_surrogate`].
fn blackbox<'a>(
    model: &'a dyn Forecaster,
    train: &'a TimeSeries,
) -> impl Fn(&TimeSeries, usize) -> Result<Vec<f64>, ForecastError> + 'a {
    move |ctx, h| {
        let input = match offset_in(train, ctx) {
            Some(start) => model_input(model, train, start, ctx.values())?,
            None => ctx.clone(),
        };
        model.predict(&input, h).map(|f| f.point)
    }
}

fn surrogate_series(
    ds: &Dataset,
    split: &SplitSeries,
    entry: &ModelEntry,
    cfg: &SurrogateConfig,
    remotes: &Remotes,
) -> Result<chronoscope_core::explain::SurrogateFit, String> {
    let fitted = fit(entry, &ds.profile, &split.train, remotes).map_err(|e| e.to_string())?;
    fit_surrogate(
        blackbox(fitted.as_dyn(), &split.train),
        &split.train,
        &ds.profile,
        None,
        cfg,
    )
    .map_err(|e| e.to_string())
}

fn shap_series(
    ds: &Dataset,
    split: &SplitSeries,
    entry: &ModelEntry,
    rc: &RunConfig,
    remotes: &Remotes,
) -> Result<SeriesShap, String> {
    let section = &rc.config.explain.shap;
    let id = split.train.series_id();
    let shap = if entry.kind == "gbdt" {
        let (ensemble, spec) = load_or_fit_gbdt(rc, ds, entry, split)?;
        let full = TimeSeries::new(id, split.train.start(), split.train.freq(), split.full_values())
            .map_err(|e| e.to_string())?;
        let fm = build_features(&full, &spec).map_err(|e| e.to_string())?;
        let rows: Vec<Vec<f64>> = fm
            .rows
            .iter()
            .zip(&fm.row_time_index)
            .filter(|(_, t)| **t >= split.split_index)
            .map(|(r, _)| r.clone())
            .take(section.max_rows)
            .collect();
        let expl = tree_shap(&ensemble, &rows).map_err(|e| e.to_string())?;
        SeriesShap::new(id, expl, None)
    } else {
        let fit = surrogate_series(ds, split, entry, &section.surrogate, remotes)?;
        let rows: Vec<Vec<f64>> = fit.holdout.rows.iter().take(section.max_rows).cloned().collect();
        let expl = tree_shap(&fit.report.surrogate, &rows).map_err(|e| e.to_string())?;
        SeriesShap::new(id, expl, Some(&fit.report))
    };
    let scale = shap.explanation.predictions.iter().fold(1.0f64, |m, p| m.max(p.abs()));
    if shap.max_additivity_error > ADDITIVITY_TOL * scale {
        return Err(format!(
            "additivity check failed: error {:e} at scale {scale}",
            shap.max_additivity_error
        ));
    }
    Ok(shap)
}

fn shap_models(rc: &RunConfig) -> Vec<&ModelEntry> {
    match &rc.config.explain.shap.models {
        Some(names) => names
            .iter()
            .map(|n| rc.model(n).expect("validated model name"))
            .collect(),
        None => rc
            .config
            .models
            .iter()
            .filter(|m| m.kind == "gbdt" || m.kind == "remote")
            .collect(),
    }
}

pub fn explain_shap(rc: &RunConfig) -> Result<Outcome, CliError> {
    let datasets = load_datasets(rc)?;
    let remotes = Remotes::connect(rc);
    let section = &rc.config.explain.shap;
    let dir = &rc.config.output.dir;
    let mut outcome = Outcome::default();
    for entry in shap_models(rc) {
        for ds in selected(&datasets, &section.datasets) {
            let results: Vec<Result<SeriesShap, String>> = ds
                .splits
                .par_iter()
                .map(|s| shap_series(ds, s, entry, rc, &remotes))
                .collect();
            let mut series = Vec::new();
            for (split, r) in ds.splits.iter().zip(results) {
                match r {
                    Ok(s) => series.push(s),
                    Err(e) => outcome.failures.push(failure(
                        "explain-shap",
                        &ds.name,
                        entry.name(),
                        Some(split.train.series_id()),
                        e,
                    )),
                }
            }
            if series.is_empty() {
                continue;
            }
            let report = match ShapReport::new(entry.name(), &ds.name, series) {
                Ok(r) => r,
                Err(e) => {
                    outcome
                        .failures
                        .push(failure("explain-shap", &ds.name, entry.name(), None, e));
                    continue;
                }
            };
            let stem = report.file_name().trim_end_matches(".json").to_string();
            outcome
                .written
                .push(write_json(&dir.join(report.file_name()), &report, Some(&rc.document))?);
            let pooled = report.pooled().map_err(chronoscope_core::Error::from)?;
            let svg = shap_beeswarm_svg(&format!("{} / {}", entry.name(), ds.name), &pooled, section.top_k);
            outcome
                .written
                .push(write_text(&dir.join(format!("{stem}.svg")), &svg)?);
        }
    }
    Ok(outcome)
}

#[derive(Debug, Serialize)]
struct SurrogateFile<'a> {
    model: &'a str,
    dataset: &'a str,
    series: BTreeMap<String, SurrogateReport>,
}

fn surrogate_models(rc: &RunConfig) -> Vec<&ModelEntry> {
    match &rc.config.explain.surrogate.models {
        Some(names) => names
            .iter()
            .map(|n| rc.model(n).expect("validated model name"))
            .collect(),
        None => {
            let remote: Vec<&ModelEntry> = rc.config.models.iter().filter(|m| m.kind == "remote").collect();
            if remote.is_empty() {
                rc.config.models.iter().filter(|m| m.kind != "gbdt").collect()
            } else {
                remote
            }
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| {
        if x.is_finite() {
            format!("{x:.6}")
        } else {
            x.to_string()
        }
    })
}

pub fn surrogate(rc: &RunConfig) -> Result<Outcome, CliError> {
    let datasets = load_datasets(rc)?;
    let remotes = Remotes::connect(rc);
    let section = &rc.config.explain.surrogate;
    let dir = &rc.config.output.dir;
    let mut outcome = Outcome::default();
    let mut table = String::from(
        "dataset,model,series_id,blackbox_mase,surrogate_mase,blackbox_smape,surrogate_smape,fidelity_rmse,series_scale,poor_fidelity\n",
    );
    for entry in surrogate_models(rc) {
        for ds in selected(&datasets, &section.datasets) {
            let results: Vec<_> = ds
                .splits
                .par_iter()
                .map(|s| surrogate_series(ds, s, entry, &section.config, &remotes))
                .collect();
            let mut series = BTreeMap::new();
            for (split, r) in ds.splits.iter().zip(results) {
                let id = split.train.series_id();
                match r {
                    Ok(fit) => {
                        let r = &fit.report;
                        table.push_str(&format!(
                            "{},{},{},{},{},{:.6},{:.6},{:.6e},{:.6},{}\n",
                            ds.name,
                            entry.name(),
                            id,
                            opt(r.blackbox_mase),
                            opt(r.surrogate_mase),
                            r.blackbox_smape,
                            r.surrogate_smape,
                            r.fidelity_rmse,
                            r.series_scale,
                            r.poor_fidelity
                        ));
                        series.insert(id.to_string(), fit.report);
                    }
                    Err(e) => outcome
                        .failures
                        .push(failure("surrogate", &ds.name, entry.name(), Some(id), e)),
                }
            }
            if series.is_empty() {
                continue;
            }
            let file = SurrogateFile {
                model: entry.name(),
                dataset: &ds.name,
                series,
            };
            let name = format!("surrogate_{}_{}.json", sanitize(entry.name()), sanitize(&ds.name));
            outcome
                .written
                .push(write_json(&dir.join(name), &file, Some(&rc.document))?);
        }
    }
    outcome
        .written
        .push(write_bytes(&dir.join("surrogate_summary.csv"), table.as_bytes())?);
    Ok(outcome)
}
