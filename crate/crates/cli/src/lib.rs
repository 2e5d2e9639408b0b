//! Library side of the `chronoscope` binary: configuration, commands and
//! their outputs. Every command returns an [`Outcome`]; per-cell failures are
//! recorded there while configuration and I/O problems abort with a
//! [`CliError`].

pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluate;
pub mod explain;
pub mod models;
pub mod output;
pub mod rate;
pub mod validate;

use std::path::PathBuf;

use serde::Serialize;

pub use config::{Overrides, RunConfig};
pub use error::CliError;

/// A cell (dataset, model, series) or dataset-level step that failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellFailure {
    pub stage: String,
    pub dataset: String,
    pub model: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series_id: Option<String>,
    pub error: String,
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub written: Vec<PathBuf>,
    pub failures: Vec<CellFailure>,
}

impl Outcome {
    pub fn merge(&mut self, other: Outcome) {
        self.written.extend(other.written);
        self.failures.extend(other.failures);
    }

    /// 0 when every cell succeeded, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            2
        }
    }
}

/// Exit code for an aborted run.
pub const EXIT_ERROR: i32 = 1;

/// `evaluate`, `explain-lime`, `explain-shap`, `surrogate` and `rate` in order.
pub fn report(rc: &RunConfig) -> Result<Outcome, CliError> {
    let mut out = evaluate::evaluate(rc)?;
    out.merge(explain::explain_lime(rc)?);
    out.merge(explain::explain_shap(rc)?);
    out.merge(explain::surrogate(rc)?);
    out.merge(rate::rate(rc, None)?);
    Ok(out)
}
