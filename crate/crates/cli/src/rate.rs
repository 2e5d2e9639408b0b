//! `rate`: causal ratings from the forecast records written by `evaluate`.

use std::collections::BTreeMap;

use chronoscope_core::harness::ForecastRecord;
use chronoscope_core::rde::{
    render_markdown, run_hypothesis, write_ratings_csv, Hypothesis, HypothesisId, RatingReport, RdeConfig, WrsWeights,
};

use crate::config::{default_protected, RunConfig};
use crate::error::CliError;
use crate::evaluate::read_forecasts;
use crate::output::{write_bytes, write_text};
use crate::{CellFailure, Outcome};

pub const RATINGS_CSV: &str = "ratings.csv";
pub const REPORT_MD: &str = "rde_report.md";

pub fn rate(rc: &RunConfig, hypotheses: Option<&[HypothesisId]>) -> Result<Outcome, CliError> {
    let dir = &rc.config.output.dir;
    let forecasts = read_forecasts(dir)?;
    let section = &rc.config.rde;
    let hypotheses = hypotheses.unwrap_or(&section.hypotheses);
    let cfg = RdeConfig {
        seed: rc.config.seed,
        weights: section.weights.map(WrsWeights).unwrap_or_default(),
        reference: section.reference.clone(),
        biased_group: section.biased_group.clone(),
    };
    let names: Vec<String> = match &section.datasets {
        Some(n) => n.clone(),
        None => forecasts
            .datasets
            .iter()
            .filter(|(_, d)| d.n_series >= 2)
            .map(|(k, _)| k.clone())
            .collect(),
    };

    let mut outcome = Outcome::default();
    let mut reports: Vec<RatingReport> = Vec::new();
    for name in &names {
        let Some(data) = forecasts.datasets.get(name) else {
            outcome.failures.push(CellFailure {
                stage: "rate".into(),
                dataset: name.clone(),
                model: String::new(),
                series_id: None,
                error: "no forecast records for this dataset; rerun evaluate".into(),
            });
            continue;
        };
        let mut by_model: BTreeMap<String, Vec<ForecastRecord>> = BTreeMap::new();
        for r in &data.records {
            by_model.entry(r.model_name.clone()).or_default().push(r.clone());
        }
        let key = section
            .protected
            .get(name)
            .copied()
            .unwrap_or_else(|| default_protected(data.freq));
        for id in hypotheses {
            let h = match id {
                HypothesisId::H1 => Hypothesis::h1(key),
                HypothesisId::H2 => Hypothesis::h2(key),
            };
            match run_hypothesis(name, &h, &by_model, &cfg) {
                Ok(r) => reports.push(r),
                Err(e) => {
                    log::error!("{name}: {e}");
                    outcome.failures.push(CellFailure {
                        stage: "rate".into(),
                        dataset: name.clone(),
                        model: String::new(),
                        series_id: None,
                        error: e.to_string(),
                    });
                }
            }
        }
    }

    let mut csv = Vec::new();
    write_ratings_csv(&mut csv, &reports).map_err(chronoscope_core::Error::from)?;
    outcome.written.push(write_bytes(&dir.join(RATINGS_CSV), &csv)?);
    let mut md = render_markdown(&reports);
    if !outcome.failures.is_empty() {
        md.push_str("\n## Not rated\n\n");
        for f in &outcome.failures {
            md.push_str(&format!("- {}: {}\n", f.dataset, f.error));
        }
    }
    md.push_str("\n## Configuration\n\n```json\n");
    md.push_str(&serde_json::to_string_pretty(&rc.document)?);
    md.push_str("\n```\n");
    outcome.written.push(write_text(&dir.join(REPORT_MD), &md)?);
    Ok(outcome)
}
