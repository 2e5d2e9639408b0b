//! Series ingestion, splitting, windowing and per-domain protocol constants.

mod ingest;
mod profile;
mod series;
mod split;
mod synth;

pub use ingest::{ingest, read_csv, write_csv, Row};
pub use profile::{Domain, DomainProfile, FillPolicy, InferenceMode};
pub use series::{format_timestamp, parse_timestamp, Freq, TimeSeries};
pub use split::{split_80_20, tile_blocks, windows, SplitSeries, TestTiling, Window};
pub use synth::{synth, SynthSpec};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("series {series_id}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { series_id: String, timestamp: String },
    #[error("line {line}: {reason}")]
    UnparseableRow { line: usize, reason: String },
    #[error("series {0:?} has no values")]
    EmptySeries(String),
    #[error("series {series_id}: timestamp {timestamp} is not on the {freq} grid")]
    OffGrid {
        series_id: String,
        timestamp: String,
        freq: Freq,
    },
    #[error("series {0}: leading value is missing and cannot be forward-filled")]
    LeadingMissing(String),
    #[error("series {0}: non-finite value")]
    NonFinite(String),
    #[error("series too short: need {needed}, have {have}")]
    TooShort { needed: usize, have: usize },
    #[error("invalid synthetic parameters: {0}")]
    BadParams(String),
    #[error("invalid profile: {0}")]
    BadProfile(String),
}
