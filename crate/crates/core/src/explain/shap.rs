//! Path-dependent TreeSHAP for [`TreeEnsemble`] models and global ranking.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::forecast::{Node, RegressionTree, TreeEnsemble};

/// Per-row, per-feature SHAP values. `base_value + sum(values[r]) == predictions[r]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub feature_names: Vec<String>,
    pub base_value: f64,
    pub values: Vec<Vec<f64>>,
    pub predictions: Vec<f64>,
    /// The explained feature rows, kept for plotting.
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_abs: f64,
}

#[derive(Debug, Clone, Copy)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    pweight: f64,
}

fn extend_path(path: &mut Vec<PathElement>, zero_fraction: f64, one_fraction: f64, feature: Option<usize>) {
    let depth = path.len();
    path.push(PathElement {
        feature,
        zero_fraction,
        one_fraction,
        pweight: if depth == 0 { 1.0 } else { 0.0 },
    });
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) as f64 / d1;
        path[i].pweight = zero_fraction * path[i].pweight * (depth - i) as f64 / d1;
    }
}

fn unwind_path(path: &mut Vec<PathElement>, index: usize) {
    let depth = path.len() - 1;
    let PathElement {
        zero_fraction,
        one_fraction,
        ..
    } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next_one = path[depth].pweight;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = path[i].pweight;
            path[i].pweight = next_one * d1 / ((i + 1) as f64 * one_fraction);
            next_one = tmp - path[i].pweight * zero_fraction * (depth - i) as f64 / d1;
        } else {
            path[i].pweight = path[i].pweight * d1 / (zero_fraction * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
    path.pop();
}

/// Total permutation weight of the path with element `index` removed.
fn unwound_path_sum(path: &[PathElement], index: usize) -> f64 {
    let depth = path.len() - 1;
    let PathElement {
        zero_fraction,
        one_fraction,
        ..
    } = path[index];
    let d1 = (depth + 1) as f64;
    let mut next_one = path[depth].pweight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one_fraction != 0.0 {
            let tmp = next_one * d1 / ((i + 1) as f64 * one_fraction);
            total += tmp;
            next_one = path[i].pweight - tmp * zero_fraction * (depth - i) as f64 / d1;
        } else if zero_fraction != 0.0 {
            total += path[i].pweight / zero_fraction / ((depth - i) as f64 / d1);
        }
    }
    total
}

struct Walker<'a> {
    nodes: &'a [Node],
    x: &'a [f64],
    phi: &'a mut [f64],
}

impl Walker<'_> {
    fn recurse(
        &mut self,
        node: usize,
        mut path: Vec<PathElement>,
        zero_fraction: f64,
        one_fraction: f64,
        feature: Option<usize>,
    ) {
        extend_path(&mut path, zero_fraction, one_fraction, feature);
        match self.nodes[node] {
            Node::Leaf { value, .. } => {
                for i in 1..path.len() {
                    let w = unwound_path_sum(&path, i);
                    let el = path[i];
                    if let Some(f) = el.feature {
                        self.phi[f] += w * (el.one_fraction - el.zero_fraction) * value;
                    }
                }
            }
            Node::Split {
                feature: split,
                threshold,
                left,
                right,
                cover,
            } => {
                let (hot, cold) = if self.x[split] <= threshold {
                    (left, right)
                } else {
                    (right, left)
                };
                let frac = |child: usize| {
                    if cover > 0.0 {
                        self.nodes[child].cover() / cover
                    } else {
                        0.0
                    }
                };
                let (hot_zero, cold_zero) = (frac(hot), frac(cold));
                let (mut in_zero, mut in_one) = (1.0, 1.0);
                if let Some(k) = path.iter().position(|e| e.feature == Some(split)) {
                    in_zero = path[k].zero_fraction;
                    in_one = path[k].one_fraction;
                    unwind_path(&mut path, k);
                }
                self.recurse(hot, path.clone(), hot_zero * in_zero, in_one, Some(split));
                self.recurse(cold, path, cold_zero * in_zero, 0.0, Some(split));
            }
        }
    }
}

/// Cover-weighted mean leaf value.
pub fn tree_expected_value(tree: &RegressionTree) -> f64 {
    fn walk(nodes: &[Node], i: usize) -> f64 {
        match nodes[i] {
            Node::Leaf { value, .. } => value,
            Node::Split { left, right, cover, .. } => {
                if cover <= 0.0 {
                    return 0.5 * (walk(nodes, left) + walk(nodes, right));
                }
                (nodes[left].cover() * walk(nodes, left) + nodes[right].cover() * walk(nodes, right)) / cover
            }
        }
    }
    walk(&tree.nodes, 0)
}

/// SHAP values of one tree's raw leaf output.
pub fn tree_shap_single(tree: &RegressionTree, x: &[f64]) -> Vec<f64> {
    let mut phi = vec![0.0; x.len()];
    let mut walker = Walker {
        nodes: &tree.nodes,
        x,
        phi: &mut phi,
    };
    walker.recurse(0, Vec::with_capacity(16), 1.0, 1.0, None);
    phi
}

/// Exact SHAP values of the ensemble output for every row.
pub fn tree_shap(ens: &TreeEnsemble, rows: &[Vec<f64>]) -> Result<ShapExplanation, ExplainError> {
    let nf = ens.n_features();
    if let Some(bad) = rows.iter().find(|r| r.len() != nf) {
        return Err(ExplainError::FeatureMismatch {
            expected: nf,
            got: bad.len(),
        });
    }
    let base_value = ens.base_score + ens.learning_rate * ens.trees.iter().map(tree_expected_value).sum::<f64>();
    let values: Vec<Vec<f64>> = rows
        .par_iter()
        .map(|x| {
            let mut phi = vec![0.0; nf];
            for tree in &ens.trees {
                for (acc, v) in phi.iter_mut().zip(tree_shap_single(tree, x)) {
                    *acc += v;
                }
            }
            phi.iter_mut().for_each(|v| *v *= ens.learning_rate);
            phi
        })
        .collect();
    Ok(ShapExplanation {
        feature_names: ens.feature_names.clone(),
        base_value,
        values,
        predictions: rows.iter().map(|x| ens.predict(x)).collect(),
        rows: rows.to_vec(),
    })
}

/// Features by mean absolute SHAP value, descending; ties by name.
pub fn global_shap(expl: &ShapExplanation) -> Result<Vec<FeatureImportance>, ExplainError> {
    if expl.values.is_empty() {
        return Err(ExplainError::NoRows);
    }
    let n = expl.values.len() as f64;
    let mut out: Vec<FeatureImportance> = expl
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| FeatureImportance {
            feature: name.clone(),
            mean_abs: expl.values.iter().map(|r| r[j].abs()).sum::<f64>() / n,
        })
        .collect();
    out.sort_by(|a, b| {
        b.mean_abs
            .total_cmp(&a.mean_abs)
            .then_with(|| a.feature.cmp(&b.feature))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::forecast::{Loss, MODEL_FORMAT_VERSION};

    fn leaf(value: f64, cover: f64) -> Node {
        Node::Leaf { value, cover }
    }

    fn split(feature: usize, threshold: f64, left: usize, right: usize, cover: f64) -> Node {
        Node::Split {
            feature,
            threshold,
            left,
            right,
            cover,
        }
    }

    fn ensemble(trees: Vec<RegressionTree>, nf: usize, lr: f64, base: f64) -> TreeEnsemble {
        TreeEnsemble {
            format_version: MODEL_FORMAT_VERSION,
            feature_names: (0..nf).map(|j| format!("f{j}")).collect(),
            n_estimators: trees.len(),
            trees,
            learning_rate: lr,
            base_score: base,
            loss: Loss::L2,
            max_depth: 3,
            min_leaf: 1,
            degenerate: false,
            checkpoints: vec![],
        }
    }

    /// E[f(x) | x_S] by following known features and cover-averaging the rest.
    fn cond_expectation(nodes: &[Node], i: usize, x: &[f64], known: u32) -> f64 {
        match nodes[i] {
            Node::Leaf { value, .. } => value,
            Node::Split {
                feature,
                threshold,
                left,
                right,
                cover,
            } => {
                if known & (1 << feature) != 0 {
                    let next = if x[feature] <= threshold { left } else { right };
                    cond_expectation(nodes, next, x, known)
                } else {
                    (nodes[left].cover() * cond_expectation(nodes, left, x, known)
                        + nodes[right].cover() * cond_expectation(nodes, right, x, known))
                        / cover
                }
            }
        }
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|k| k as f64).product()
    }

    /// Shapley values by enumerating every coalition.
    fn brute_force(ens: &TreeEnsemble, x: &[f64]) -> Vec<f64> {
        let m = x.len();
        let v = |s: u32| -> f64 {
            ens.base_score
                + ens.learning_rate
                    * ens
                        .trees
                        .iter()
                        .map(|t| cond_expectation(&t.nodes, 0, x, s))
                        .sum::<f64>()
        };
        let values: Vec<f64> = (0..1u32 << m).map(v).collect();
        (0..m)
            .map(|i| {
                let mut phi = 0.0;
                for s in 0..1u32 << m {
                    if s & (1 << i) != 0 {
                        continue;
                    }
                    let k = s.count_ones() as usize;
                    let w = factorial(k) * factorial(m - k - 1) / factorial(m);
                    phi += w * (values[(s | (1 << i)) as usize] - values[s as usize]);
                }
                phi
            })
            .collect()
    }

    fn random_tree(rng: &mut ChaCha8Rng, nf: usize, max_depth: usize) -> RegressionTree {
        fn grow(rng: &mut ChaCha8Rng, nodes: &mut Vec<Node>, nf: usize, depth: usize, cover: f64) -> usize {
            let idx = nodes.len();
            if depth == 0 || cover < 2.0 || rng.random_bool(0.2) {
                nodes.push(leaf(rng.random_range(-5.0..5.0), cover));
                return idx;
            }
            nodes.push(leaf(0.0, cover));
            let left_cover = rng.random_range(1..cover as usize) as f64;
            let feature = rng.random_range(0..nf);
            let threshold = rng.random_range(-1.0..1.0);
            let left = grow(rng, nodes, nf, depth - 1, left_cover);
            let right = grow(rng, nodes, nf, depth - 1, cover - left_cover);
            nodes[idx] = split(feature, threshold, left, right, cover);
            idx
        }
        let mut nodes = Vec::new();
        let cover = rng.random_range(20..200) as f64;
        grow(rng, &mut nodes, nf, max_depth, cover);
        RegressionTree { nodes }
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol * b.abs().max(1.0), "{a} vs {b}");
    }

    #[test]
    fn single_leaf_tree_has_zero_values() {
        let ens = ensemble(
            vec![RegressionTree {
                nodes: vec![leaf(3.0, 10.0)],
            }],
            2,
            1.0,
            0.0,
        );
        let e = tree_shap(&ens, &[vec![0.3, -1.0]]).unwrap();
        assert_eq!(e.values[0], vec![0.0, 0.0]);
        assert_eq!(e.base_value, 3.0);
    }

    #[test]
    fn stump_matches_two_subset_oracle() {
        let tree = RegressionTree {
            nodes: vec![split(0, 0.5, 1, 2, 10.0), leaf(1.0, 4.0), leaf(6.0, 6.0)],
        };
        let ens = ensemble(vec![tree], 1, 1.0, 0.0);
        let e = tree_shap(&ens, &[vec![0.0], vec![1.0]]).unwrap();
        // v({}) = 0.4*1 + 0.6*6 = 4; v({0}) = leaf value.
        assert_close(e.base_value, 4.0, 1e-12);
        assert_close(e.values[0][0], 1.0 - 4.0, 1e-12);
        assert_close(e.values[1][0], 6.0 - 4.0, 1e-12);
    }

    #[test]
    fn random_ensembles_match_brute_force() {
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nf = rng.random_range(1..=10);
            let n_trees = rng.random_range(1..=4);
            let trees = (0..n_trees).map(|_| random_tree(&mut rng, nf, 3)).collect();
            let ens = ensemble(trees, nf, rng.random_range(0.01..1.0), rng.random_range(-2.0..2.0));
            let rows: Vec<Vec<f64>> = (0..3)
                .map(|_| (0..nf).map(|_| rng.random_range(-1.5..1.5)).collect())
                .collect();
            let e = tree_shap(&ens, &rows).unwrap();
            for (r, x) in rows.iter().enumerate() {
                let oracle = brute_force(&ens, x);
                for (got, want) in e.values[r].iter().zip(&oracle) {
                    assert_close(*got, *want, 1e-9);
                }
                let total = e.base_value + e.values[r].iter().sum::<f64>();
                assert_close(total, ens.predict(x), 1e-9);
            }
        }
    }

    #[test]
    fn unused_feature_gets_zero() {
        let tree = RegressionTree {
            nodes: vec![
                split(0, 0.0, 1, 2, 30.0),
                split(2, 1.0, 3, 4, 10.0),
                leaf(-1.0, 20.0),
                leaf(2.0, 4.0),
                leaf(5.0, 6.0),
            ],
        };
        let ens = ensemble(vec![tree], 3, 0.5, 1.0);
        let rows = vec![vec![-1.0, 7.0, 0.0], vec![-1.0, -7.0, 3.0], vec![2.0, 0.0, 0.0]];
        let e = tree_shap(&ens, &rows).unwrap();
        assert!(e.values.iter().all(|r| r[1] == 0.0));
    }

    #[test]
    fn twin_features_share_mass_equally() {
        let a = RegressionTree {
            nodes: vec![
                split(0, 0.0, 1, 4, 40.0),
                split(1, 0.0, 2, 3, 20.0),
                leaf(1.0, 12.0),
                leaf(3.0, 8.0),
                leaf(7.0, 20.0),
            ],
        };
        let b = RegressionTree {
            nodes: vec![
                split(1, 0.0, 1, 4, 40.0),
                split(0, 0.0, 2, 3, 20.0),
                leaf(1.0, 12.0),
                leaf(3.0, 8.0),
                leaf(7.0, 20.0),
            ],
        };
        let ens = ensemble(vec![a, b], 2, 1.0, 0.0);
        for v in [-1.0, 0.5] {
            let e = tree_shap(&ens, &[vec![v, v]]).unwrap();
            assert_close(e.values[0][0], e.values[0][1], 1e-9);
        }
    }

    #[test]
    fn feature_count_is_checked() {
        let ens = ensemble(vec![], 3, 1.0, 0.0);
        assert!(matches!(
            tree_shap(&ens, &[vec![1.0]]),
            Err(ExplainError::FeatureMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn global_ranking() {
        let expl = ShapExplanation {
            feature_names: vec!["b".into(), "a".into(), "c".into()],
            base_value: 0.0,
            values: vec![vec![1.0, 3.0, 1.0], vec![-1.0, -3.0, -1.0]],
            predictions: vec![0.0, 0.0],
            rows: vec![],
        };
        let g = global_shap(&expl).unwrap();
        let names: Vec<&str> = g.iter().map(|f| f.feature.as_str()).collect();
        assert_eq!(names, ["a", "b", "c"]);
        assert_eq!(g[0].mean_abs, 3.0);
        let one = ShapExplanation {
            feature_names: vec!["only".into()],
            values: vec![vec![0.0]],
            ..expl.clone()
        };
        assert_eq!(global_shap(&one).unwrap()[0].feature, "only");
        let none = ShapExplanation { values: vec![], ..expl };
        assert!(matches!(global_shap(&none), Err(ExplainError::NoRows)));
    }
}
