//! Loads the configured datasets and splits every series 80/20.

use std::fs::File;

use chronoscope_core::data::{read_csv, split_80_20, synth, Domain, DomainProfile, Freq, SplitSeries, TimeSeries};

use crate::config::{RunConfig, Source};
use crate::error::CliError;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub domain: Domain,
    pub freq: Freq,
    pub profile: DomainProfile,
    pub series: Vec<TimeSeries>,
    pub splits: Vec<SplitSeries>,
}

impl Dataset {
    pub fn split(&self, series_id: &str) -> Option<&SplitSeries> {
        self.splits.iter().find(|s| s.train.series_id() == series_id)
    }
}

/// Seed of the `index`-th synthetic series of the `dataset`-th dataset.
pub fn series_seed(seed: u64, dataset: usize, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((dataset as u64) << 32 | index as u64)
}

pub fn load_datasets(rc: &RunConfig) -> Result<Vec<Dataset>, CliError> {
    rc.config
        .data
        .datasets
        .iter()
        .enumerate()
        .map(|(d, entry)| {
            let profile = rc
                .config
                .profiles
                .get(&entry.name)
                .cloned()
                .unwrap_or_default()
                .apply(DomainProfile::builtin(entry.domain));
            let (series, freq) = match &entry.source {
                Source::Synth {
                    spec,
                    length,
                    n_series,
                    freq,
                } => {
                    let series = (0..*n_series)
                        .map(|i| {
                            synth(spec, *length, series_seed(rc.config.seed, d, i), *freq)
                                .map(|s| s.with_id(format!("{}-{i:02}", entry.name)))
                        })
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| CliError::ConfigInvalid {
                            key: format!("data.datasets[{d}].source.spec"),
                            reason: e.to_string(),
                        })?;
                    (series, *freq)
                }
                Source::Csv { path, freq } => {
                    let full = rc.base_dir.join(path);
                    let file =
                        File::open(&full).map_err(|e| CliError::MissingInput(format!("{}: {e}", full.display())))?;
                    let series = read_csv(file, *freq, profile.fill)
                        .map_err(|e| CliError::MissingInput(format!("{}: {e}", full.display())))?;
                    (series, *freq)
                }
            };
            let splits = series
                .iter()
                .map(split_80_20)
                .collect::<Result<Vec<_>, _>>()
                .map_err(chronoscope_core::Error::from)?;
            Ok(Dataset {
                name: entry.name.clone(),
                domain: entry.domain,
                freq,
                profile,
                series,
                splits,
            })
        })
        .collect()
}
