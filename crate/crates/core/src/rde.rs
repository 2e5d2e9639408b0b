//! Rating-driven explanations.
//!
//! Forecast residuals become a causal frame of (treatment, outcome, protected)
//! records. Two metrics are computed on it: the weighted rejection score (WRS),
//! which counts pairwise t-test rejections between protected groups, and the
//! average treatment effect (ATE) of the treatment on the outcome, adjusted for
//! the protected attribute by G-computation. Each metric is set against a
//! random (permuted) and a biased (one group inflated) baseline, and models are
//! rated by dense rank.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;

use chrono::{Datelike, Timelike};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::parse_timestamp;
use crate::harness::ForecastRecord;
use crate::statkit::{mean, population_std, sample_variance, t_test_two_sample, StatError};

#[derive(Debug, Error)]
pub enum RdeError {
    #[error("cannot derive protected key '{key}' from timestamp '{value}'; {hint}")]
    UnresolvableProtectedKey { key: String, value: String, hint: String },
    #[error("fewer than two protected groups with at least two outcomes (have {0})")]
    GroupTooSmall(usize),
    #[error("fewer than two treatment levels (have {0})")]
    TooFewTreatments(usize),
    #[error("reference treatment '{0}' not in frame")]
    MissingReference(String),
    #[error("no treatment shares a protected level with the reference")]
    AllCellsEmpty,
    #[error("empty causal frame")]
    EmptyFrame,
    #[error("{0}")]
    SingleSeries(String),
    #[error("no models to rate")]
    NoModels,
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Protected attribute derived from a forecast timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtectedKey {
    Month,
    DayOfWeek,
    Hour,
}

impl fmt::Display for ProtectedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtectedKey::Month => "month",
            ProtectedKey::DayOfWeek => "day-of-week",
            ProtectedKey::Hour => "hour",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TreatmentKey {
    SeriesId,
    Model,
}

impl fmt::Display for TreatmentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TreatmentKey::SeriesId => "series-id",
            TreatmentKey::Model => "model",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalRecord {
    pub treatment: String,
    pub outcome: f64,
    pub protected: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CausalFrame {
    pub records: Vec<CausalRecord>,
}

impl CausalFrame {
    pub fn from_triples<T: Into<String>, Z: Into<String>>(rows: impl IntoIterator<Item = (T, f64, Z)>) -> Self {
        Self {
            records: rows
                .into_iter()
                .map(|(t, o, z)| CausalRecord {
                    treatment: t.into(),
                    outcome: o,
                    protected: z.into(),
                })
                .collect(),
        }
    }

    pub fn treatments(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.treatment.as_str()).collect()
    }

    pub fn protected_levels(&self) -> BTreeSet<&str> {
        self.records.iter().map(|r| r.protected.as_str()).collect()
    }

    pub fn outcomes(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.outcome).collect()
    }

    fn groups(&self) -> BTreeMap<&str, Vec<f64>> {
        let mut g: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in &self.records {
            g.entry(r.protected.as_str()).or_default().push(r.outcome);
        }
        g
    }
}

fn protected_label(key: ProtectedKey, ts: &str) -> Result<String, RdeError> {
    let parsed = parse_timestamp(ts).ok_or_else(|| RdeError::UnresolvableProtectedKey {
        key: key.to_string(),
        value: ts.to_string(),
        hint: "timestamps must be RFC 3339 or 'YYYY-MM-DD[ HH:MM[:SS]]'".into(),
    })?;
    Ok(match key {
        ProtectedKey::Month => format!("{:02}", parsed.month()),
        ProtectedKey::DayOfWeek => parsed.weekday().num_days_from_monday().to_string(),
        ProtectedKey::Hour => format!("{:02}", parsed.hour()),
    })
}

/// One record per forecast point: `O = |y_true - y_pred|`, `T` from the
/// record, `Z` from the point's timestamp.
pub fn build_frame(
    records: &[ForecastRecord],
    treatment: TreatmentKey,
    protected: ProtectedKey,
) -> Result<CausalFrame, RdeError> {
    let mut frame = CausalFrame::default();
    for rec in records {
        let t = match treatment {
            TreatmentKey::SeriesId => &rec.series_id,
            TreatmentKey::Model => &rec.model_name,
        };
        for ((ts, y), p) in rec.timestamps.iter().zip(&rec.y_true).zip(&rec.y_pred) {
            frame.records.push(CausalRecord {
                treatment: t.clone(),
                outcome: (y - p).abs(),
                protected: protected_label(protected, ts)?,
            });
        }
    }
    Ok(frame)
}

/// Weights per confidence level, aligned with [`crate::statkit::CONFIDENCE_LEVELS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrsWeights(pub [f64; 3]);

impl Default for WrsWeights {
    fn default() -> Self {
        Self([1.0, 0.8, 0.6])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WrsResult {
    /// `raw / (sum(w) * C(m, 2))`, in `[0, 1]`.
    pub normalized: f64,
    /// `sum_i w_i x_i`.
    pub raw: f64,
    /// Rejection count per confidence level.
    pub rejections: [usize; 3],
    pub n_pairs: usize,
    pub groups: Vec<String>,
    /// Groups with fewer than two outcomes.
    pub dropped_groups: Vec<String>,
}

/// Weighted rejection score over all pairs of protected groups.
pub fn wrs(frame: &CausalFrame, weights: &WrsWeights) -> Result<WrsResult, RdeError> {
    let mut groups = frame.groups();
    let dropped: Vec<String> = groups
        .iter()
        .filter(|(_, v)| v.len() < 2)
        .map(|(k, _)| k.to_string())
        .collect();
    if !dropped.is_empty() {
        log::warn!("WRS: dropping protected groups with fewer than 2 outcomes: {dropped:?}");
    }
    groups.retain(|_, v| v.len() >= 2);
    if groups.len() < 2 {
        return Err(RdeError::GroupTooSmall(groups.len()));
    }
    let samples: Vec<&Vec<f64>> = groups.values().collect();
    let mut rejections = [0usize; 3];
    let mut n_pairs = 0;
    for i in 0..samples.len() {
        for j in i + 1..samples.len() {
            n_pairs += 1;
            let test = t_test_two_sample(samples[i], samples[j])?;
            for (k, level) in test.levels.iter().enumerate() {
                rejections[k] += usize::from(level.reject);
            }
        }
    }
    let raw: f64 = rejections.iter().zip(&weights.0).map(|(x, w)| *x as f64 * w).sum();
    let wsum: f64 = weights.0.iter().sum();
    Ok(WrsResult {
        normalized: raw / (wsum * n_pairs as f64),
        raw,
        rejections,
        n_pairs,
        groups: groups.keys().map(|k| k.to_string()).collect(),
        dropped_groups: dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentEffect {
    /// `E[O | do(T = t)]` over the protected levels shared with the reference.
    pub do_mean: f64,
    pub do_mean_reference: f64,
    /// `|do_mean - do_mean_reference|`.
    pub effect: f64,
    pub std_err: f64,
    /// Protected levels without records for this treatment or the reference.
    pub dropped_levels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AteResult {
    /// Mean of the absolute effects over all non-reference treatments.
    pub ate: f64,
    pub std_err: f64,
    pub reference: String,
    pub effects: BTreeMap<String, TreatmentEffect>,
}

struct Cell {
    n: f64,
    mean: f64,
    var: f64,
}

/// G-computation ATE against `reference` (default: the lexicographically
/// first treatment). `P(Z)` comes from the whole frame; protected levels
/// missing for either side of a comparison are dropped and the remaining
/// weights renormalised.
pub fn ate(frame: &CausalFrame, reference: Option<&str>) -> Result<AteResult, RdeError> {
    if frame.records.is_empty() {
        return Err(RdeError::EmptyFrame);
    }
    let treatments = frame.treatments();
    if treatments.len() < 2 {
        return Err(RdeError::TooFewTreatments(treatments.len()));
    }
    let reference = match reference {
        Some(r) if treatments.contains(r) => r.to_string(),
        Some(r) => return Err(RdeError::MissingReference(r.to_string())),
        None => treatments.iter().next().expect("two treatments").to_string(),
    };
    let n_total = frame.records.len() as f64;
    let mut pz: BTreeMap<&str, f64> = BTreeMap::new();
    let mut cells: BTreeMap<(&str, &str), Vec<f64>> = BTreeMap::new();
    for r in &frame.records {
        *pz.entry(r.protected.as_str()).or_default() += 1.0 / n_total;
        cells
            .entry((r.treatment.as_str(), r.protected.as_str()))
            .or_default()
            .push(r.outcome);
    }
    let stats: BTreeMap<(&str, &str), Cell> = cells
        .into_iter()
        .map(|(k, v)| {
            let n = v.len() as f64;
            (
                k,
                Cell {
                    n,
                    mean: mean(&v),
                    var: sample_variance(&v),
                },
            )
        })
        .collect();

    let mut effects = BTreeMap::new();
    for &t in treatments.iter().filter(|t| **t != reference) {
        let (mut wsum, mut mu_t, mut mu_r, mut var) = (0.0, 0.0, 0.0, 0.0);
        let mut dropped = Vec::new();
        for (&z, &p) in &pz {
            match (stats.get(&(t, z)), stats.get(&(reference.as_str(), z))) {
                (Some(a), Some(b)) => {
                    wsum += p;
                    mu_t += p * a.mean;
                    mu_r += p * b.mean;
                    var += p * p * (a.var / a.n + b.var / b.n);
                }
                _ => dropped.push(z.to_string()),
            }
        }
        if !dropped.is_empty() {
            log::warn!("ATE: treatment {t} vs {reference}: dropping empty cells at {dropped:?}");
        }
        if wsum == 0.0 {
            continue;
        }
        let (mu_t, mu_r) = (mu_t / wsum, mu_r / wsum);
        effects.insert(
            t.to_string(),
            TreatmentEffect {
                do_mean: mu_t,
                do_mean_reference: mu_r,
                effect: (mu_t - mu_r).abs(),
                std_err: var.sqrt() / wsum,
                dropped_levels: dropped,
            },
        );
    }
    if effects.is_empty() {
        return Err(RdeError::AllCellsEmpty);
    }
    let k = effects.len() as f64;
    Ok(AteResult {
        ate: effects.values().map(|e| e.effect).sum::<f64>() / k,
        std_err: effects.values().map(|e| e.std_err * e.std_err).sum::<f64>().sqrt() / k,
        reference,
        effects,
    })
}

/// Unadjusted `|mean(O | t) - mean(O | reference)|` averaged over `t`.
pub fn naive_difference(frame: &CausalFrame, reference: &str) -> Result<f64, RdeError> {
    let mut by_t: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in &frame.records {
        by_t.entry(r.treatment.as_str()).or_default().push(r.outcome);
    }
    let base = mean(
        by_t.get(reference)
            .ok_or_else(|| RdeError::MissingReference(reference.into()))?,
    );
    let diffs: Vec<f64> = by_t
        .iter()
        .filter(|(t, _)| **t != reference)
        .map(|(_, v)| (mean(v) - base).abs())
        .collect();
    if diffs.is_empty() {
        return Err(RdeError::TooFewTreatments(1));
    }
    Ok(mean(&diffs))
}

/// Outcomes permuted uniformly across all records.
pub fn random_baseline(frame: &CausalFrame, seed: u64) -> CausalFrame {
    let mut outcomes = frame.outcomes();
    outcomes.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = frame.clone();
    for (r, o) in out.records.iter_mut().zip(outcomes) {
        r.outcome = o;
    }
    out
}

/// Outcomes of protected group `group` (default: the first level) raised by
/// three population standard deviations of all outcomes.
pub fn biased_baseline(frame: &CausalFrame, group: Option<&str>) -> CausalFrame {
    let shift = 3.0 * population_std(&frame.outcomes());
    let target = match group {
        Some(g) => g.to_string(),
        None => frame
            .protected_levels()
            .into_iter()
            .next()
            .unwrap_or_default()
            .to_string(),
    };
    let mut out = frame.clone();
    for r in out.records.iter_mut().filter(|r| r.protected == target) {
        r.outcome += shift;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ate,
    Wrs,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Ate => "ATE",
            Metric::Wrs => "WRS",
        })
    }
}

/// `(value, raw value)` of `metric` on `frame`.
pub fn metric_value(metric: Metric, frame: &CausalFrame, cfg: &RdeConfig) -> Result<(f64, f64), RdeError> {
    match metric {
        Metric::Ate => {
            let r = ate(frame, cfg.reference.as_deref())?;
            Ok((r.ate, r.ate))
        }
        Metric::Wrs => {
            let r = wrs(frame, &cfg.weights)?;
            Ok((r.normalized, r.raw))
        }
    }
}

/// Dense ranks of `value` ascending, after rounding to two decimals; ties share
/// a rank. Output is ordered by rating, then model name.
pub fn rate(models: &[(String, f64)]) -> Vec<(String, f64, usize)> {
    let key = |v: f64| {
        let r = (v * 100.0).round();
        if r.is_nan() {
            f64::INFINITY
        } else {
            r
        }
    };
    let mut levels: Vec<f64> = models.iter().map(|(_, v)| key(*v)).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let mut out: Vec<(String, f64, usize)> = models
        .iter()
        .map(|(m, v)| {
            let rank = levels.iter().position(|l| *l == key(*v)).expect("level present") + 1;
            (m.clone(), *v, rank)
        })
        .collect();
    out.sort_by(|a, b| a.2.cmp(&b.2).then_with(|| a.0.cmp(&b.0)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisId {
    H1,
    H2,
}

/// A structured hypothesis: which variable is the treatment, which is the
/// protected attribute, and which metric tests it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub id: HypothesisId,
    pub treatment_key: TreatmentKey,
    pub protected_key: ProtectedKey,
    pub metric: Metric,
}

impl Hypothesis {
    /// Series-dependent error, tested with ATE.
    pub fn h1(protected_key: ProtectedKey) -> Self {
        Self {
            id: HypothesisId::H1,
            treatment_key: TreatmentKey::SeriesId,
            protected_key,
            metric: Metric::Ate,
        }
    }

    /// Group-dependent error, tested with WRS.
    pub fn h2(protected_key: ProtectedKey) -> Self {
        Self {
            id: HypothesisId::H2,
            treatment_key: TreatmentKey::SeriesId,
            protected_key,
            metric: Metric::Wrs,
        }
    }

    pub fn statement(&self) -> String {
        match self.metric {
            Metric::Ate => format!(
                "Once {} is accounted for, the size of the forecast error depends on which series is forecast.",
                self.protected_key
            ),
            Metric::Wrs => format!(
                "The distribution of forecast residuals differs between {} groups.",
                self.protected_key
            ),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RdeConfig {
    pub seed: u64,
    #[serde(default)]
    pub weights: WrsWeights,
    #[serde(default)]
    pub reference: Option<String>,
    #[serde(default)]
    pub biased_group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingRow {
    pub dataset: String,
    pub model: String,
    pub metric: Metric,
    pub value: f64,
    pub raw_value: f64,
    pub rating: usize,
    pub baseline_random: f64,
    pub baseline_biased: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingReport {
    pub dataset: String,
    pub hypothesis: Hypothesis,
    pub rows: Vec<RatingRow>,
    pub narrative: String,
}

/// Builds a frame per model, computes the hypothesis metric and its baselines,
/// and rates the models.
pub fn run_hypothesis(
    dataset: &str,
    hypothesis: &Hypothesis,
    records_by_model: &BTreeMap<String, Vec<ForecastRecord>>,
    cfg: &RdeConfig,
) -> Result<RatingReport, RdeError> {
    if records_by_model.is_empty() {
        return Err(RdeError::NoModels);
    }
    let series: BTreeSet<&str> = records_by_model
        .values()
        .flatten()
        .map(|r| r.series_id.as_str())
        .collect();
    if series.len() < 2 {
        return Err(RdeError::SingleSeries(format!(
            "dataset '{dataset}' has a single series; with one series there is no series effect to estimate \
             and no meaningful protected grouping to compare, so rating is refused"
        )));
    }
    let computed: Vec<(String, f64, f64, f64, f64)> = records_by_model
        .par_iter()
        .map(|(model, recs)| {
            let frame = build_frame(recs, hypothesis.treatment_key, hypothesis.protected_key)?;
            let (value, raw) = metric_value(hypothesis.metric, &frame, cfg)?;
            let (random, _) = metric_value(hypothesis.metric, &random_baseline(&frame, cfg.seed), cfg)?;
            let (biased, _) = metric_value(
                hypothesis.metric,
                &biased_baseline(&frame, cfg.biased_group.as_deref()),
                cfg,
            )?;
            Ok((model.clone(), value, raw, random, biased))
        })
        .collect::<Result<_, RdeError>>()?;
    let ratings = rate(&computed.iter().map(|c| (c.0.clone(), c.1)).collect::<Vec<_>>());
    let rows: Vec<RatingRow> = ratings
        .iter()
        .map(|(model, value, rating)| {
            let c = computed.iter().find(|c| &c.0 == model).expect("computed model");
            RatingRow {
                dataset: dataset.to_string(),
                model: model.clone(),
                metric: hypothesis.metric,
                value: *value,
                raw_value: c.2,
                rating: *rating,
                baseline_random: c.3,
                baseline_biased: c.4,
            }
        })
        .collect();
    let narrative = narrative(dataset, hypothesis, &rows);
    Ok(RatingReport {
        dataset: dataset.to_string(),
        hypothesis: hypothesis.clone(),
        rows,
        narrative,
    })
}

fn narrative(dataset: &str, h: &Hypothesis, rows: &[RatingRow]) -> String {
    let mut s = format!(
        "Hypothesis {}: {} Metric: {} (lower is better), treatment = {}, protected = {}.",
        match h.id {
            HypothesisId::H1 => "H1",
            HypothesisId::H2 => "H2",
        },
        h.statement(),
        h.metric,
        h.treatment_key,
        h.protected_key
    );
    if let Some(best) = rows.first() {
        s.push_str(&format!(
            " On {dataset}, {} rates best with {} = {:.2}.",
            best.model, h.metric, best.value
        ));
    }
    let above_random: Vec<&str> = rows
        .iter()
        .filter(|r| r.value > r.baseline_random)
        .map(|r| r.model.as_str())
        .collect();
    if !above_random.is_empty() {
        s.push_str(&format!(" Above the random baseline: {}.", above_random.join(", ")));
    }
    s
}

fn fmt_f(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        v.to_string()
    }
}

pub fn write_ratings_csv<W: Write>(w: W, reports: &[RatingReport]) -> Result<(), RdeError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "dataset",
        "model",
        "metric",
        "value",
        "raw_value",
        "rating",
        "baseline_random",
        "baseline_biased",
    ])?;
    for row in reports.iter().flat_map(|r| &r.rows) {
        out.write_record([
            row.dataset.clone(),
            row.model.clone(),
            row.metric.to_string(),
            fmt_f(row.value),
            fmt_f(row.raw_value),
            row.rating.to_string(),
            fmt_f(row.baseline_random),
            fmt_f(row.baseline_biased),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn render_markdown(reports: &[RatingReport]) -> String {
    let mut s = String::from("# Rating report\n");
    for r in reports {
        s.push_str(&format!(
            "\n## {} / {}\n\n{}\n\n",
            r.dataset, r.hypothesis.metric, r.narrative
        ));
        s.push_str(&format!(
            "| Model | {} | Rating | Random baseline | Biased baseline |\n|---|---|---|---|---|\n",
            r.hypothesis.metric
        ));
        for row in &r.rows {
            s.push_str(&format!(
                "| {} | {:.2} | {} | {:.2} | {:.2} |\n",
                row.model, row.value, row.rating, row.baseline_random, row.baseline_biased
            ));
        }
    }
    s
}
