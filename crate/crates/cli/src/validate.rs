//! `validate`: config and data checks plus protocol conformance of every
//! remote endpoint.

use chronoscope_core::adapter::{conformance_suite, CheckResult, Endpoint, DEFAULT_TIMEOUT};

use crate::config::RunConfig;
use crate::dataset::load_datasets;
use crate::error::CliError;
use crate::{CellFailure, Outcome};

/// Runs the conformance suite against `endpoint` and prints one line per check.
pub fn check_endpoint(name: &str, endpoint: &Endpoint, seed: u64, timeout: std::time::Duration) -> Vec<CheckResult> {
    let transport = endpoint.connect(seed);
    let results = conformance_suite(transport.as_ref(), timeout);
    for r in &results {
        println!(
            "{} {name} {}: {}",
            if r.passed { "ok  " } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    results
}

fn failures(name: &str, results: &[CheckResult]) -> Vec<CellFailure> {
    results
        .iter()
        .filter(|r| !r.passed)
        .map(|r| CellFailure {
            stage: "validate".into(),
            dataset: String::new(),
            model: name.to_string(),
            series_id: None,
            error: format!("{}: {}", r.name, r.detail),
        })
        .collect()
}

pub fn validate_config(rc: &RunConfig) -> Result<Outcome, CliError> {
    let datasets = load_datasets(rc)?;
    for ds in &datasets {
        println!("ok   dataset {}: {} series, freq {}", ds.name, ds.series.len(), ds.freq);
    }
    let mut outcome = Outcome::default();
    for (name, endpoint) in &rc.endpoints {
        let timeout = rc.model(name).map_or(DEFAULT_TIMEOUT, |m| m.timeout());
        let results = check_endpoint(name, endpoint, rc.config.seed, timeout);
        outcome.failures.extend(failures(name, &results));
    }
    Ok(outcome)
}

pub fn validate_endpoint(text: &str, seed: u64) -> Result<Outcome, CliError> {
    let endpoint: Endpoint = text
        .trim()
        .parse()
        .map_err(|e: chronoscope_core::adapter::AdapterError| CliError::ConfigInvalid {
            key: "--forecaster".into(),
            reason: e.to_string(),
        })?;
    let results = check_endpoint(&endpoint.to_string(), &endpoint, seed, DEFAULT_TIMEOUT);
    Ok(Outcome {
        written: Vec::new(),
        failures: failures(&endpoint.to_string(), &results),
    })
}
