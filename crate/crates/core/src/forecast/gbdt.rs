//! Gradient-boosted regression trees on quantile-binned features.

use serde::{Deserialize, Serialize};

use super::{ContextPolicy, Forecast, ForecastError, Forecaster};
use crate::data::{DomainProfile, TimeSeries};
use crate::features::{build_features, FeatureMatrix, FeatureSpec, FeatureState};

/// Bumped whenever the serialized layout changes.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// Absolute error: sign gradients, median leaves.
    L1,
    /// Squared error: residual gradients, mean leaves.
    L2,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct GbdtParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
    pub loss: Loss,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub max_bins: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        Self {
            n_estimators: 500,
            learning_rate: 0.05,
            loss: Loss::L1,
            max_depth: 6,
            min_leaf: 20,
            max_bins: 64,
        }
    }
}

/// Tree node; `cover` is the number of training rows that reached it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
        cover: f64,
    },
    Leaf {
        value: f64,
        cover: f64,
    },
}

impl Node {
    pub fn cover(&self) -> f64 {
        match self {
            Node::Split { cover, .. } | Node::Leaf { cover, .. } => *cover,
        }
    }
}

/// Nodes in preorder; index 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub trees: Vec<RegressionTree>,
    pub learning_rate: f64,
    pub base_score: f64,
    /// Requested number of trees; fewer are stored when boosting stops early.
    pub n_estimators: usize,
    pub loss: Loss,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Constant training target: the model is `base_score` alone.
    pub degenerate: bool,
    /// `(trees, mean training loss)` at 0 trees and every 50 trees.
    pub checkpoints: Vec<(usize, f64)>,
}

impl TreeEnsemble {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// `base_score + learning_rate * sum of leaf values`.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.leaf_value(x)).sum();
        self.base_score + self.learning_rate * sum
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> Result<Self, ForecastError> {
        let ens: Self = serde_json::from_str(s).map_err(|e| ForecastError::BadModel(e.to_string()))?;
        if ens.format_version != MODEL_FORMAT_VERSION {
            return Err(ForecastError::BadModel(format!(
                "format version {} (expected {MODEL_FORMAT_VERSION})",
                ens.format_version
            )));
        }
        let nf = ens.n_features();
        for tree in &ens.trees {
            for node in &tree.nodes {
                match node {
                    Node::Split {
                        feature, left, right, ..
                    } => {
                        if *feature >= nf || *left >= tree.nodes.len() || *right >= tree.nodes.len() {
                            return Err(ForecastError::BadModel("dangling split".into()));
                        }
                    }
                    Node::Leaf { value, .. } if !value.is_finite() => {
                        return Err(ForecastError::BadModel("non-finite leaf".into()));
                    }
                    Node::Leaf { .. } => {}
                }
            }
        }
        Ok(ens)
    }
}

fn median_of(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean_loss(loss: Loss, resid: &[f64]) -> f64 {
    let n = resid.len() as f64;
    match loss {
        Loss::L1 => resid.iter().map(|r| r.abs()).sum::<f64>() / n,
        Loss::L2 => resid.iter().map(|r| r * r).sum::<f64>() / n,
    }
}

/// Per-feature split candidates and the bin index of every row.
struct Binned {
    thresholds: Vec<Vec<f64>>,
    /// `bins[j][i]`: index of the first threshold `>= x[i][j]`.
    bins: Vec<Vec<u16>>,
}

impl Binned {
    fn new(rows: &[Vec<f64>], n_features: usize, max_bins: usize) -> Self {
        let n = rows.len();
        let mut thresholds = Vec::with_capacity(n_features);
        let mut bins = Vec::with_capacity(n_features);
        for j in 0..n_features {
            let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            col.sort_by(f64::total_cmp);
            let mut uniq = col.clone();
            uniq.dedup();
            let mut th: Vec<f64> = if uniq.len() <= max_bins {
                uniq[..uniq.len().saturating_sub(1)].to_vec()
            } else {
                let mut t: Vec<f64> = (1..max_bins).map(|b| col[b * n / max_bins]).collect();
                t.dedup();
                t
            };
            if let Some(&max) = uniq.last() {
                th.retain(|&t| t < max);
            }
            let b: Vec<u16> = rows.iter().map(|r| th.partition_point(|&t| t < r[j]) as u16).collect();
            thresholds.push(th);
            bins.push(b);
        }
        Self { thresholds, bins }
    }
}

struct Grower<'a> {
    binned: &'a Binned,
    grad: &'a [f64],
    resid: &'a [f64],
    params: &'a GbdtParams,
}

impl Grower<'_> {
    fn leaf(&self, rows: &[usize]) -> Node {
        let mut r: Vec<f64> = rows.iter().map(|&i| self.resid[i]).collect();
        let value = match self.params.loss {
            Loss::L1 => median_of(&mut r),
            Loss::L2 => r.iter().sum::<f64>() / r.len() as f64,
        };
        Node::Leaf {
            value,
            cover: rows.len() as f64,
        }
    }

    /// Best `(feature, threshold index, gain)` by variance reduction of the gradients.
    fn best_split(&self, rows: &[usize]) -> Option<(usize, usize, f64)> {
        let min_leaf = self.params.min_leaf.max(1);
        if rows.len() < 2 * min_leaf {
            return None;
        }
        let n = rows.len() as f64;
        let g_total: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let parent = g_total * g_total / n;
        let mut best: Option<(usize, usize, f64)> = None;
        for (j, th) in self.binned.thresholds.iter().enumerate() {
            if th.is_empty() {
                continue;
            }
            let nb = th.len() + 1;
            let mut cnt = vec![0usize; nb];
            let mut sum = vec![0.0; nb];
            let col = &self.binned.bins[j];
            for &i in rows {
                let b = col[i] as usize;
                cnt[b] += 1;
                sum[b] += self.grad[i];
            }
            let (mut cl, mut gl) = (0usize, 0.0);
            for b in 0..th.len() {
                cl += cnt[b];
                gl += sum[b];
                let cr = rows.len() - cl;
                if cl < min_leaf {
                    continue;
                }
                if cr < min_leaf {
                    break;
                }
                let gr = g_total - gl;
                let gain = gl * gl / cl as f64 + gr * gr / cr as f64 - parent;
                if gain > 1e-12 && best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((j, b, gain));
                }
            }
        }
        best
    }

    fn grow(&self, rows: Vec<usize>, depth: usize, nodes: &mut Vec<Node>) -> usize {
        let id = nodes.len();
        let split = if depth < self.params.max_depth {
            self.best_split(&rows)
        } else {
            None
        };
        let Some((feature, b, _)) = split else {
            nodes.push(self.leaf(&rows));
            return id;
        };
        let cover = rows.len() as f64;
        let col = &self.binned.bins[feature];
        let (l, r): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&i| col[i] as usize <= b);
        nodes.push(Node::Leaf { value: 0.0, cover });
        let left = self.grow(l, depth + 1, nodes);
        let right = self.grow(r, depth + 1, nodes);
        nodes[id] = Node::Split {
            feature,
            threshold: self.binned.thresholds[feature][b],
            left,
            right,
            cover,
        };
        id
    }
}

/// Boosts `params.n_estimators` trees on `fm`. A constant target yields a
/// tree-less model flagged `degenerate`; boosting stops early once every
/// training residual is exactly zero.
pub fn gbdt_fit(fm: &FeatureMatrix, params: &GbdtParams) -> Result<TreeEnsemble, ForecastError> {
    if fm.rows.is_empty() {
        return Err(ForecastError::EmptyFeatures);
    }
    let n = fm.rows.len();
    let y = &fm.target;
    let base_score = match params.loss {
        Loss::L1 => median_of(&mut y.clone()),
        Loss::L2 => y.iter().sum::<f64>() / n as f64,
    };
    let mut ens = TreeEnsemble {
        format_version: MODEL_FORMAT_VERSION,
        feature_names: fm.names.clone(),
        trees: Vec::new(),
        learning_rate: params.learning_rate,
        base_score,
        n_estimators: params.n_estimators,
        loss: params.loss,
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        degenerate: false,
        checkpoints: Vec::new(),
    };
    if y.iter().all(|v| *v == y[0]) {
        ens.base_score = y[0];
        ens.degenerate = true;
        ens.checkpoints.push((0, 0.0));
        return Ok(ens);
    }

    let binned = Binned::new(&fm.rows, fm.n_features(), params.max_bins.clamp(2, u16::MAX as usize));
    let mut leaf_sum = vec![0.0; n];
    let mut resid: Vec<f64> = y.iter().map(|v| v - base_score).collect();
    ens.checkpoints.push((0, mean_loss(params.loss, &resid)));
    for m in 1..=params.n_estimators {
        if resid.iter().all(|r| *r == 0.0) {
            log::debug!("gbdt stopped after {} trees: zero training residual", m - 1);
            break;
        }
        let grad: Vec<f64> = match params.loss {
            Loss::L1 => resid.iter().map(|r| if *r == 0.0 { 0.0 } else { r.signum() }).collect(),
            Loss::L2 => resid.clone(),
        };
        let grower = Grower {
            binned: &binned,
            grad: &grad,
            resid: &resid,
            params,
        };
        let mut nodes = Vec::new();
        grower.grow((0..n).collect(), 0, &mut nodes);
        let tree = RegressionTree { nodes };
        for (i, row) in fm.rows.iter().enumerate() {
            leaf_sum[i] += tree.leaf_value(row);
            resid[i] = y[i] - (base_score + params.learning_rate * leaf_sum[i]);
        }
        ens.trees.push(tree);
        if m % 50 == 0 {
            ens.checkpoints.push((m, mean_loss(params.loss, &resid)));
        }
    }
    Ok(ens)
}

/// Predicts `horizon` values one step at a time, appending each prediction to
/// the history and recomputing features before the next step.
pub fn gbdt_forecast_iterative(
    ens: &TreeEnsemble,
    history: &TimeSeries,
    spec: &FeatureSpec,
    horizon: usize,
) -> Result<Vec<f64>, ForecastError> {
    spec.validate()?;
    let mut state = FeatureState::from_series(spec, history);
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let row = state.row()?;
        let y = ens.predict(&row);
        out.push(y);
        state.push(y);
    }
    Ok(out)
}

/// GBDT [`Forecaster`] over the profile's feature preset (or an explicit spec).
#[derive(Debug, Clone, Default)]
pub struct GbdtForecaster {
    pub params: GbdtParams,
    pub spec: Option<FeatureSpec>,
    pub model: Option<TreeEnsemble>,
}

impl GbdtForecaster {
    pub fn new(params: GbdtParams, spec: Option<FeatureSpec>) -> Self {
        Self {
            params,
            spec,
            model: None,
        }
    }
}

impl Forecaster for GbdtForecaster {
    fn name(&self) -> &str {
        "gbdt"
    }

    fn fit(&mut self, train: &TimeSeries, profile: &DomainProfile) -> Result<(), ForecastError> {
        let spec = self
            .spec
            .get_or_insert_with(|| FeatureSpec::preset(profile.name, profile.seasonal_period))
            .clone();
        let fm = build_features(train, &spec)?;
        self.model = Some(gbdt_fit(&fm, &self.params)?);
        Ok(())
    }

    fn predict(&self, context: &TimeSeries, horizon: usize) -> Result<Forecast, ForecastError> {
        let (Some(model), Some(spec)) = (&self.model, &self.spec) else {
            return Err(ForecastError::NotFitted("gbdt".into()));
        };
        gbdt_forecast_iterative(model, context, spec, horizon).map(Forecast::point)
    }

    fn context_policy(&self) -> ContextPolicy {
        ContextPolicy::FullHistory
    }
}

#[cfg(test)]
mod tests {
    use chrono::{TimeZone, Utc};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::data::Freq;

    fn matrix(rows: Vec<Vec<f64>>, target: Vec<f64>) -> FeatureMatrix {
        let nf = rows[0].len();
        FeatureMatrix {
            names: (0..nf).map(|j| format!("x{j}")).collect(),
            row_time_index: (0..rows.len()).collect(),
            rows,
            target,
        }
    }

    /// Independent walker over the serialized JSON form.
    fn walk_json(tree: &serde_json::Value, x: &[f64]) -> f64 {
        let nodes = tree["nodes"].as_array().unwrap();
        let mut i = 0usize;
        loop {
            let n = &nodes[i];
            if n["type"] == "leaf" {
                return n["value"].as_f64().unwrap();
            }
            let f = n["feature"].as_u64().unwrap() as usize;
            let t = n["threshold"].as_f64().unwrap();
            i = if x[f] <= t {
                n["left"].as_u64()
            } else {
                n["right"].as_u64()
            }
            .unwrap() as usize;
        }
    }

    #[test]
    fn constant_target() {
        let fm = matrix((0..50).map(|i| vec![i as f64]).collect(), vec![5.0; 50]);
        let ens = gbdt_fit(&fm, &GbdtParams::default()).unwrap();
        assert!(ens.degenerate);
        assert_eq!(ens.base_score, 5.0);
        assert!(ens.trees.iter().all(|t| t
            .nodes
            .iter()
            .all(|n| !matches!(n, Node::Leaf { value, .. } if *value != 0.0))));
        assert_eq!(ens.predict(&[123.0]), 5.0);
    }

    #[test]
    fn identity_target_fits_closely() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let xs: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..10.0)).collect();
        let fm = matrix(xs.iter().map(|&x| vec![x]).collect(), xs.clone());
        let ens = gbdt_fit(&fm, &GbdtParams::default()).unwrap();
        let mae = xs.iter().map(|&x| (ens.predict(&[x]) - x).abs()).sum::<f64>() / 200.0;
        let std = crate::statkit::population_std(&xs);
        assert!(mae < 0.05 * std, "mae {mae} std {std}");
    }

    #[test]
    fn checkpoint_losses_do_not_increase() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| (3.0 * r[0]).sin() + r[1] * r[1] + rng.random_range(-0.2..0.2))
            .collect();
        for loss in [Loss::L1, Loss::L2] {
            let params = GbdtParams {
                loss,
                ..GbdtParams::default()
            };
            let ens = gbdt_fit(&matrix(rows.clone(), y.clone()), &params).unwrap();
            assert_eq!(ens.checkpoints.len(), 11);
            for w in ens.checkpoints.windows(2) {
                assert!(w[1].1 <= w[0].1 + 1e-12, "{loss:?} {:?}", ens.checkpoints);
            }
        }
    }

    #[test]
    fn prediction_matches_independent_walker() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| r[0] * 4.0 - r[2] + r[1] * r[3]).collect();
        let params = GbdtParams {
            n_estimators: 60,
            ..GbdtParams::default()
        };
        let ens = gbdt_fit(&matrix(rows.clone(), y), &params).unwrap();
        let doc: serde_json::Value = serde_json::from_str(&ens.to_json().unwrap()).unwrap();
        let lr = doc["learning_rate"].as_f64().unwrap();
        let base = doc["base_score"].as_f64().unwrap();
        for r in rows.iter().take(50) {
            let mut sum = 0.0;
            for t in doc["trees"].as_array().unwrap() {
                sum += walk_json(t, r);
            }
            assert_eq!(ens.predict(r), base + lr * sum);
        }
        for t in &ens.trees {
            assert!(t.depth() <= 6);
            for node in &t.nodes {
                if let Node::Leaf { cover, .. } = node {
                    assert!(*cover >= 20.0);
                }
            }
        }
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let fm = matrix(
            (0..60).map(|i| vec![i as f64]).collect(),
            (0..60).map(|i| (i / 10) as f64).collect(),
        );
        let params = GbdtParams {
            n_estimators: 10,
            ..GbdtParams::default()
        };
        let ens = gbdt_fit(&fm, &params).unwrap();
        let json = ens.to_json().unwrap();
        assert_eq!(TreeEnsemble::from_json(&json).unwrap(), ens);
        let bad = json.replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(matches!(TreeEnsemble::from_json(&bad), Err(ForecastError::BadModel(_))));
    }

    #[test]
    fn iterative_forecast_matches_manual_steps() {
        let start = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        let values: Vec<f64> = (0..120).map(|t| ((t % 6) as f64) * 2.0 + 1.0).collect();
        let s = TimeSeries::new("x", start, Freq::Hourly, values.clone()).unwrap();
        let spec = FeatureSpec::default().with_lags([1, 2, 6]);
        let fm = build_features(&s, &spec).unwrap();
        let ens = gbdt_fit(
            &fm,
            &GbdtParams {
                n_estimators: 80,
                ..GbdtParams::default()
            },
        )
        .unwrap();
        let two = gbdt_forecast_iterative(&ens, &s, &spec, 2).unwrap();
        let first = gbdt_forecast_iterative(&ens, &s, &spec, 1).unwrap()[0];
        let mut extended = values;
        extended.push(first);
        let s2 = TimeSeries::new("x", start, Freq::Hourly, extended).unwrap();
        let second = gbdt_forecast_iterative(&ens, &s2, &spec, 1).unwrap()[0];
        assert_eq!(two, vec![first, second]);
    }

    #[test]
    fn constant_model_forecasts_constant() {
        let fm = matrix((0..30).map(|i| vec![i as f64]).collect(), vec![2.5; 30]);
        let ens = gbdt_fit(&fm, &GbdtParams::default()).unwrap();
        let start = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        let s = TimeSeries::new("x", start, Freq::Hourly, vec![1.0, 2.0, 3.0]).unwrap();
        let spec = FeatureSpec::default().with_lags([1]);
        assert_eq!(gbdt_forecast_iterative(&ens, &s, &spec, 4).unwrap(), vec![2.5; 4]);
    }

    #[test]
    fn empty_matrix_is_rejected() {
        let fm = FeatureMatrix {
            names: vec!["a".into()],
            rows: vec![],
            target: vec![],
            row_time_index: vec![],
        };
        assert_eq!(gbdt_fit(&fm, &GbdtParams::default()), Err(ForecastError::EmptyFeatures));
    }
}
