//! The run configuration: one JSON document with `data`, `profiles`,
//! `models`, `explain`, `rde` and `output` sections.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use chronoscope_core::adapter::{Endpoint, ScalingHint};
use chronoscope_core::data::{Domain, DomainProfile, FillPolicy, Freq, InferenceMode, SynthSpec};
use chronoscope_core::explain::{LimeConfig, SurrogateConfig};
use chronoscope_core::features::FeatureSpec;
use chronoscope_core::forecast::{ArimaConfig, GbdtParams};
use chronoscope_core::rde::{HypothesisId, ProtectedKey};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MODEL_KINDS: [&str; 4] = ["arima", "gbdt", "seasonal-naive", "remote"];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub seed: u64,
    pub data: DataSection,
    /// Per-dataset overrides of the domain's built-in profile.
    #[serde(default)]
    pub profiles: BTreeMap<String, ProfileOverride>,
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub explain: ExplainSection,
    #[serde(default)]
    pub rde: RdeSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub datasets: Vec<DatasetEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    pub domain: Domain,
    pub source: Source,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum Source {
    /// `n_series` generated series named `<dataset>-00`, `<dataset>-01`, ...
    Synth {
        spec: SynthSpec,
        length: usize,
        #[serde(default = "one")]
        n_series: usize,
        freq: Freq,
    },
    /// Long-format CSV (`series_id,timestamp,value`); relative paths resolve
    /// against the config file's directory.
    Csv { path: PathBuf, freq: Freq },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileOverride {
    pub context: Option<usize>,
    pub horizon: Option<usize>,
    pub seasonal_period: Option<usize>,
    pub fill: Option<FillPolicy>,
    pub arima_rolling_window: Option<usize>,
    pub inference: Option<InferenceMode>,
}

impl ProfileOverride {
    pub fn apply(&self, mut p: DomainProfile) -> DomainProfile {
        if let Some(v) = self.context {
            p.context = v;
        }
        if let Some(v) = self.horizon {
            p.horizon = v;
        }
        if let Some(v) = self.seasonal_period {
            p.seasonal_period = v;
        }
        if let Some(v) = self.fill {
            p.fill = v;
        }
        if let Some(v) = self.arima_rolling_window {
            p.arima_rolling_window = v;
        }
        if let Some(v) = self.inference {
            p.inference = v;
        }
        p
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelEntry {
    /// Display name; defaults to the kind.
    pub name: Option<String>,
    pub kind: String,
    pub arima: Option<ArimaConfig>,
    /// Refit ARIMA coefficients before every rolling step.
    pub arima_refit: Option<bool>,
    pub gbdt: Option<GbdtParams>,
    pub features: Option<FeatureSpec>,
    /// `cmd:`, `http:` or `mock:` endpoint of a remote forecaster.
    pub endpoint: Option<String>,
    pub timeout_ms: Option<u64>,
    pub scaling_hint: Option<ScalingHint>,
    /// Datasets the model may have seen during pretraining; their metric rows are flagged.
    #[serde(default)]
    pub seen_in_pretraining: Vec<String>,
}

impl ModelEntry {
    pub fn name(&self) -> &str {
        self.name.as_deref().unwrap_or(&self.kind)
    }

    pub fn timeout(&self) -> Duration {
        self.timeout_ms
            .map_or(chronoscope_core::adapter::DEFAULT_TIMEOUT, Duration::from_millis)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainSection {
    #[serde(default)]
    pub lime: LimeSection,
    #[serde(default)]
    pub shap: ShapSection,
    #[serde(default)]
    pub surrogate: SurrogateSection,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimeSection {
    /// Model to explain; defaults to the first ARIMA model, else the first model.
    pub model: Option<String>,
    pub datasets: Option<Vec<String>>,
    pub max_series: Option<usize>,
    /// The run seed replaces `config.seed`.
    #[serde(default)]
    pub config: LimeConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapSection {
    /// Defaults to every GBDT and remote model.
    pub models: Option<Vec<String>>,
    pub datasets: Option<Vec<String>>,
    /// Explained rows per series (the earliest test rows).
    #[serde(default = "default_max_rows")]
    pub max_rows: usize,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
    #[serde(default)]
    pub surrogate: SurrogateConfig,
}

fn default_max_rows() -> usize {
    200
}

fn default_top_k() -> usize {
    10
}

impl Default for ShapSection {
    fn default() -> Self {
        Self {
            models: None,
            datasets: None,
            max_rows: default_max_rows(),
            top_k: default_top_k(),
            surrogate: SurrogateConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateSection {
    /// Defaults to every remote model, else every non-GBDT model.
    pub models: Option<Vec<String>>,
    pub datasets: Option<Vec<String>>,
    #[serde(default)]
    pub config: SurrogateConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdeSection {
    /// Defaults to every dataset with at least two series.
    pub datasets: Option<Vec<String>>,
    #[serde(default = "both_hypotheses")]
    pub hypotheses: Vec<HypothesisId>,
    /// Protected attribute per dataset; default month for monthly and
    /// business-daily data, hour otherwise.
    #[serde(default)]
    pub protected: BTreeMap<String, ProtectedKey>,
    pub weights: Option<[f64; 3]>,
    pub reference: Option<String>,
    pub biased_group: Option<String>,
}

fn both_hypotheses() -> Vec<HypothesisId> {
    vec![HypothesisId::H1, HypothesisId::H2]
}

impl Default for RdeSection {
    fn default() -> Self {
        Self {
            datasets: None,
            hypotheses: both_hypotheses(),
            protected: BTreeMap::new(),
            weights: None,
            reference: None,
            biased_group: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// Write fitted ARIMA/GBDT model documents under `models/`.
    #[serde(default = "yes")]
    pub save_models: bool,
}

fn default_dir() -> PathBuf {
    PathBuf::from("chronoscope-out")
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            save_models: true,
        }
    }
}

/// Command-line values that take precedence over the document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub forecaster: Option<String>,
    pub arima_refit: bool,
    pub output: Option<PathBuf>,
}

/// A validated configuration plus the document it came from.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub config: Config,
    /// The document after overrides, embedded in JSON outputs.
    pub document: serde_json::Value,
    /// Directory of the config file, for relative data paths.
    pub base_dir: PathBuf,
    /// Endpoint per remote model, resolved from the entry, `--forecaster` or the environment.
    pub endpoints: BTreeMap<String, Endpoint>,
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::ConfigInvalid {
            key: "<file>".into(),
            reason: format!("cannot read {}: {e}", path.display()),
        })?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_str(&text, base_dir, overrides)
    }

    pub fn from_str(text: &str, base_dir: PathBuf, overrides: &Overrides) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            CliError::ConfigInvalid {
                key: if key == "." { "<root>".into() } else { key },
                reason: e.into_inner().to_string(),
            }
        })?;
        if let Some(seed) = overrides.seed {
            config.seed = seed;
        }
        if let Some(dir) = &overrides.output {
            config.output.dir = dir.clone();
        }
        if overrides.arima_refit {
            for m in config.models.iter_mut().filter(|m| m.kind == "arima") {
                m.arima_refit = Some(true);
            }
        }
        let endpoints = validate(&config, overrides)?;
        let document = serde_json::to_value(&config).expect("config serializes");
        Ok(Self {
            config,
            document,
            base_dir,
            endpoints,
        })
    }

    pub fn model(&self, name: &str) -> Option<&ModelEntry> {
        self.config.models.iter().find(|m| m.name() == name)
    }

    pub fn dataset_names(&self) -> Vec<&str> {
        self.config.data.datasets.iter().map(|d| d.name.as_str()).collect()
    }
}

fn invalid(key: impl Into<String>, reason: impl Into<String>) -> CliError {
    CliError::ConfigInvalid {
        key: key.into(),
        reason: reason.into(),
    }
}

fn check_names(key: &str, names: &Option<Vec<String>>, known: &BTreeSet<&str>, what: &str) -> Result<(), CliError> {
    for (i, n) in names.iter().flatten().enumerate() {
        if !known.contains(n.as_str()) {
            return Err(invalid(format!("{key}[{i}]"), format!("unknown {what} '{n}'")));
        }
    }
    Ok(())
}

fn validate(config: &Config, overrides: &Overrides) -> Result<BTreeMap<String, Endpoint>, CliError> {
    if config.data.datasets.is_empty() {
        return Err(invalid("data.datasets", "at least one dataset is required"));
    }
    let mut datasets = BTreeSet::new();
    for (i, d) in config.data.datasets.iter().enumerate() {
        if d.name.is_empty() || !datasets.insert(d.name.as_str()) {
            return Err(invalid(
                format!("data.datasets[{i}].name"),
                format!("empty or duplicate dataset name '{}'", d.name),
            ));
        }
        if let Source::Synth { length, n_series, .. } = &d.source {
            if *length == 0 || *n_series == 0 {
                return Err(invalid(
                    format!("data.datasets[{i}].source"),
                    "length and n_series must be positive",
                ));
            }
        }
        let profile = config
            .profiles
            .get(&d.name)
            .cloned()
            .unwrap_or_default()
            .apply(DomainProfile::builtin(d.domain));
        profile
            .validate()
            .map_err(|e| invalid(format!("profiles.{}", d.name), e.to_string()))?;
    }
    for key in config.profiles.keys() {
        if !datasets.contains(key.as_str()) {
            return Err(invalid(format!("profiles.{key}"), "no dataset with this name"));
        }
    }

    if config.models.is_empty() {
        return Err(invalid("models", "at least one model is required"));
    }
    let env_endpoint = std::env::var(chronoscope_core::adapter::ENDPOINT_ENV)
        .ok()
        .filter(|v| !v.trim().is_empty());
    let mut names = BTreeSet::new();
    let mut endpoints = BTreeMap::new();
    for (i, m) in config.models.iter().enumerate() {
        let key = |field: &str| format!("models[{i}].{field}");
        if !MODEL_KINDS.contains(&m.kind.as_str()) {
            return Err(invalid(
                key("kind"),
                format!("unknown model '{}'; expected one of {}", m.kind, MODEL_KINDS.join(", ")),
            ));
        }
        if !names.insert(m.name()) {
            return Err(invalid(key("name"), format!("duplicate model name '{}'", m.name())));
        }
        let only = |present: bool, field: &str, kind: &str| {
            if present && m.kind != kind {
                Err(invalid(key(field), format!("only valid for kind '{kind}'")))
            } else {
                Ok(())
            }
        };
        only(m.arima.is_some(), "arima", "arima")?;
        only(m.arima_refit.is_some(), "arima_refit", "arima")?;
        only(m.gbdt.is_some(), "gbdt", "gbdt")?;
        only(m.features.is_some(), "features", "gbdt")?;
        only(m.endpoint.is_some(), "endpoint", "remote")?;
        only(m.timeout_ms.is_some(), "timeout_ms", "remote")?;
        only(m.scaling_hint.is_some(), "scaling_hint", "remote")?;
        for (j, d) in m.seen_in_pretraining.iter().enumerate() {
            if !datasets.contains(d.as_str()) {
                return Err(invalid(
                    format!("models[{i}].seen_in_pretraining[{j}]"),
                    format!("unknown dataset '{d}'"),
                ));
            }
        }
        if let Some(spec) = &m.features {
            spec.validate().map_err(|e| invalid(key("features"), e.to_string()))?;
        }
        if m.kind == "remote" {
            let (source, text) = match (&m.endpoint, &overrides.forecaster, &env_endpoint) {
                (Some(e), _, _) => (key("endpoint"), e.clone()),
                (None, Some(f), _) => ("--forecaster".to_string(), f.clone()),
                (None, None, Some(v)) => (chronoscope_core::adapter::ENDPOINT_ENV.to_string(), v.clone()),
                (None, None, None) => {
                    return Err(invalid(
                        key("endpoint"),
                        format!(
                            "remote model needs an endpoint (set it here, pass --forecaster, or set {})",
                            chronoscope_core::adapter::ENDPOINT_ENV
                        ),
                    ))
                }
            };
            let endpoint: Endpoint = text
                .trim()
                .parse()
                .map_err(|e: chronoscope_core::adapter::AdapterError| invalid(source, e.to_string()))?;
            endpoints.insert(m.name().to_string(), endpoint);
        }
    }

    let lime = &config.explain.lime;
    if let Some(model) = &lime.model {
        if !names.contains(model.as_str()) {
            return Err(invalid("explain.lime.model", format!("unknown model '{model}'")));
        }
    }
    check_names("explain.lime.datasets", &lime.datasets, &datasets, "dataset")?;
    if lime.max_series == Some(0) {
        return Err(invalid("explain.lime.max_series", "must be positive"));
    }
    check_names("explain.shap.models", &config.explain.shap.models, &names, "model")?;
    check_names(
        "explain.shap.datasets",
        &config.explain.shap.datasets,
        &datasets,
        "dataset",
    )?;
    check_names(
        "explain.surrogate.models",
        &config.explain.surrogate.models,
        &names,
        "model",
    )?;
    check_names(
        "explain.surrogate.datasets",
        &config.explain.surrogate.datasets,
        &datasets,
        "dataset",
    )?;
    check_names("rde.datasets", &config.rde.datasets, &datasets, "dataset")?;
    for key in config.rde.protected.keys() {
        if !datasets.contains(key.as_str()) {
            return Err(invalid(format!("rde.protected.{key}"), "no dataset with this name"));
        }
    }
    if let Some(w) = config.rde.weights {
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(invalid(
                "rde.weights",
                "weights must be finite, non-negative and not all zero",
            ));
        }
    }
    Ok(endpoints)
}

/// Default protected attribute for a frequency.
pub fn default_protected(freq: Freq) -> ProtectedKey {
    match freq {
        Freq::Monthly | Freq::BusinessDaily => ProtectedKey::Month,
        Freq::Hourly | Freq::Minutely => ProtectedKey::Hour,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "seed": 3,
        "data": {"datasets": [{"name": "cars", "domain": "car",
            "source": {"type": "synth", "spec": {"kind": "sparse-poisson", "rate": 2.0}, "length": 60, "n_series": 3, "freq": "monthly"}}]},
        "models": [{"kind": "seasonal-naive"}, {"name": "chronos", "kind": "remote", "endpoint": "mock:seasonal"}]
    }"#;

    fn load(text: &str) -> Result<RunConfig, CliError> {
        RunConfig::from_str(text, PathBuf::new(), &Overrides::default())
    }

    fn key_of(r: Result<RunConfig, CliError>) -> String {
        match r {
            Err(CliError::ConfigInvalid { key, .. }) => key,
            other => panic!("expected ConfigInvalid, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_loads_with_defaults() {
        let rc = load(BASE).unwrap();
        assert_eq!(rc.config.seed, 3);
        assert_eq!(rc.config.models[0].name(), "seasonal-naive");
        assert_eq!(rc.endpoints["chronos"].to_string(), "mock:seasonal");
        assert_eq!(rc.config.rde.hypotheses, vec![HypothesisId::H1, HypothesisId::H2]);
        assert_eq!(rc.document["seed"], 3);
    }

    #[test]
    fn unknown_model_names_the_key() {
        let text = BASE.replace(r#"{"kind": "seasonal-naive"}"#, r#"{"kind": "prophet"}"#);
        assert_eq!(key_of(load(&text)), "models[0].kind");
    }

    #[test]
    fn unknown_fields_name_the_path() {
        let text = BASE.replace(r#""n_series": 3"#, r#""n_series": 3, "colour": 1"#);
        assert_eq!(key_of(load(&text)), "data.datasets[0].source");
        let text = BASE.replace(r#""seed": 3"#, r#""seed": "x""#);
        assert_eq!(key_of(load(&text)), "seed");
    }

    #[test]
    fn cross_references_are_checked() {
        let text = BASE.replace(r#""models""#, r#""profiles": {"trucks": {}}, "models""#);
        assert_eq!(key_of(load(&text)), "profiles.trucks");
        let text = BASE.replace(r#""models""#, r#""rde": {"datasets": ["power"]}, "models""#);
        assert_eq!(key_of(load(&text)), "rde.datasets[0]");
        let text = BASE.replace(r#""models""#, r#""explain": {"lime": {"model": "llama"}}, "models""#);
        assert_eq!(key_of(load(&text)), "explain.lime.model");
        let text = BASE.replace(
            r#""kind": "seasonal-naive""#,
            r#""kind": "seasonal-naive", "endpoint": "mock:echo""#,
        );
        assert_eq!(key_of(load(&text)), "models[0].endpoint");
        let text = BASE.replace(r#""models""#, r#""profiles": {"cars": {"horizon": 0}}, "models""#);
        assert_eq!(key_of(load(&text)), "profiles.cars");
    }

    #[test]
    fn remote_endpoint_resolution() {
        let text = BASE.replace(r#", "endpoint": "mock:seasonal""#, "");
        if std::env::var_os(chronoscope_core::adapter::ENDPOINT_ENV).is_none() {
            assert_eq!(key_of(load(&text)), "models[1].endpoint");
        }
        let o = Overrides {
            forecaster: Some("mock:echo".into()),
            ..Overrides::default()
        };
        let rc = RunConfig::from_str(&text, PathBuf::new(), &o).unwrap();
        assert_eq!(rc.endpoints["chronos"].to_string(), "mock:echo");
        let o = Overrides {
            forecaster: Some("gopher:x".into()),
            ..Overrides::default()
        };
        assert_eq!(key_of(RunConfig::from_str(&text, PathBuf::new(), &o)), "--forecaster");
    }

    #[test]
    fn overrides_apply() {
        let text = BASE.replace(r#"{"kind": "seasonal-naive"}"#, r#"{"kind": "arima"}"#);
        let o = Overrides {
            seed: Some(11),
            arima_refit: true,
            output: Some(PathBuf::from("/tmp/x")),
            ..Overrides::default()
        };
        let rc = RunConfig::from_str(&text, PathBuf::new(), &o).unwrap();
        assert_eq!(rc.config.seed, 11);
        assert_eq!(rc.config.models[0].arima_refit, Some(true));
        assert_eq!(rc.document["output"]["dir"], "/tmp/x");
    }
}
