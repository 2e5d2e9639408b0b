//! Segment LIME for forecasters.
//!
//! The context is cut into uniform segments, random binary masks switch
//! segments off (replacing them by a perturbation), the model is queried on
//! each perturbed context and a kernel-weighted linear model of the explained
//! forecast value on the mask bits gives one signed weight per segment.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExplainError;
use crate::statkit::wls_fit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perturbation {
    /// Switched-off segments become 0.
    Zero,
    /// Switched-off segments become their own mean.
    LocalMean,
    /// Switched-off values `v` become `max(context) - v`.
    InverseMax,
}

/// Which scalar of the forecast vector is explained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplainTarget {
    FinalValue,
    FirstValue,
    Midpoint,
    Max,
    Min,
}

impl ExplainTarget {
    pub fn pick(self, forecast: &[f64]) -> Option<f64> {
        if forecast.is_empty() {
            return None;
        }
        Some(match self {
            ExplainTarget::FinalValue => forecast[forecast.len() - 1],
            ExplainTarget::FirstValue => forecast[0],
            ExplainTarget::Midpoint => forecast[forecast.len() / 2],
            ExplainTarget::Max => forecast.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ExplainTarget::Min => forecast.iter().copied().fold(f64::INFINITY, f64::min),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    pub n_segments: usize,
    pub n_samples: usize,
    pub perturbation: Perturbation,
    pub kernel_width: f64,
    pub seed: u64,
    pub explain_target: ExplainTarget,
    /// Query the model one sample at a time (for models that are not safe to call concurrently).
    pub serial: bool,
}

impl Default for LimeConfig {
    fn default() -> Self {
        Self {
            n_segments: 20,
            n_samples: 200,
            perturbation: Perturbation::Zero,
            kernel_width: 0.75,
            seed: 0,
            explain_target: ExplainTarget::FinalValue,
            serial: false,
        }
    }
}

impl LimeConfig {
    pub fn validate(&self, context_len: usize) -> Result<(), ExplainError> {
        if self.n_segments == 0 || self.n_segments > context_len {
            return Err(ExplainError::TooManySegments {
                segments: self.n_segments,
                len: context_len,
            });
        }
        if self.n_samples < self.n_segments {
            return Err(ExplainError::BadConfig(format!(
                "n_samples ({}) must be >= n_segments ({})",
                self.n_samples, self.n_segments
            )));
        }
        if !(self.kernel_width > 0.0 && self.kernel_width.is_finite()) {
            return Err(ExplainError::BadConfig("kernel_width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentAttribution {
    /// Half-open `(start, end)` index ranges tiling the context.
    pub segment_bounds: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub fit_r2: f64,
    /// Explained value on the unperturbed context.
    pub target_value: f64,
    /// Every sampled output was identical; weights are zero and `fit_r2` is 0.
    pub degenerate: bool,
    /// The all-zero mask was excluded from sampling.
    pub excluded_all_zero_mask: bool,
}

/// Contiguous segments whose lengths differ by at most one, longer ones first.
pub fn segment_uniform(context_len: usize, n_segments: usize) -> Result<Vec<(usize, usize)>, ExplainError> {
    if n_segments == 0 || n_segments > context_len {
        return Err(ExplainError::TooManySegments {
            segments: n_segments,
            len: context_len,
        });
    }
    let base = context_len / n_segments;
    let extra = context_len % n_segments;
    let mut bounds = Vec::with_capacity(n_segments);
    let mut start = 0;
    for j in 0..n_segments {
        let len = base + usize::from(j < extra);
        bounds.push((start, start + len));
        start += len;
    }
    Ok(bounds)
}

/// Replaces every segment whose mask bit is `false`.
pub fn perturb(context: &[f64], bounds: &[(usize, usize)], mask: &[bool], strategy: Perturbation) -> Vec<f64> {
    let mut out = context.to_vec();
    let max = context.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for (&(a, b), &keep) in bounds.iter().zip(mask) {
        if keep {
            continue;
        }
        match strategy {
            Perturbation::Zero => out[a..b].fill(0.0),
            Perturbation::LocalMean => {
                let m = context[a..b].iter().sum::<f64>() / (b - a) as f64;
                out[a..b].fill(m);
            }
            Perturbation::InverseMax => {
                for v in &mut out[a..b] {
                    *v = max - *v;
                }
            }
        }
    }
    out
}

/// Masks for one run: the all-ones mask first, then uniform random masks.
fn sample_masks(cfg: &LimeConfig) -> Vec<Vec<bool>> {
    let m = cfg.n_segments;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let exclude_zero = cfg.perturbation == Perturbation::Zero;
    let mut masks = Vec::with_capacity(cfg.n_samples);
    masks.push(vec![true; m]);
    while masks.len() < cfg.n_samples {
        let mask: Vec<bool> = (0..m).map(|_| rng.random_bool(0.5)).collect();
        if exclude_zero && mask.iter().all(|b| !b) {
            continue;
        }
        masks.push(mask);
    }
    masks
}

/// Explains `cfg.explain_target` of `model_predict(context)`.
pub fn lime_explain<F, E>(
    model_predict: F,
    context: &[f64],
    cfg: &LimeConfig,
) -> Result<SegmentAttribution, ExplainError>
where
    F: Fn(&[f64]) -> Result<Vec<f64>, E> + Sync,
    E: std::fmt::Display,
{
    cfg.validate(context.len())?;
    let bounds = segment_uniform(context.len(), cfg.n_segments)?;
    let masks = sample_masks(cfg);
    let score = |mask: &Vec<bool>| -> Result<f64, ExplainError> {
        let x = perturb(context, &bounds, mask, cfg.perturbation);
        let fc = model_predict(&x).map_err(|e| ExplainError::Model(e.to_string()))?;
        cfg.explain_target
            .pick(&fc)
            .filter(|v| v.is_finite())
            .ok_or_else(|| ExplainError::Model("empty or non-finite forecast".into()))
    };
    let y: Vec<f64> = if cfg.serial {
        masks.iter().map(score).collect::<Result<_, _>>()?
    } else {
        masks.par_iter().map(score).collect::<Result<_, _>>()?
    };

    let m = cfg.n_segments;
    let excluded_all_zero_mask = cfg.perturbation == Perturbation::Zero;
    if y.iter().all(|v| *v == y[0]) {
        return Ok(SegmentAttribution {
            segment_bounds: bounds,
            weights: vec![0.0; m],
            intercept: y[0],
            fit_r2: 0.0,
            target_value: y[0],
            degenerate: true,
            excluded_all_zero_mask,
        });
    }

    let kernel: Vec<f64> = masks
        .iter()
        .map(|mask| {
            let d = mask.iter().filter(|b| !**b).count() as f64 / m as f64;
            (-(d * d) / (cfg.kernel_width * cfg.kernel_width)).exp()
        })
        .collect();
    let design = DMatrix::from_fn(masks.len(), m + 1, |r, c| {
        if c == 0 {
            1.0
        } else {
            f64::from(u8::from(masks[r][c - 1]))
        }
    });
    let beta = wls_fit(&design, &y, &kernel)?;
    let wsum: f64 = kernel.iter().sum();
    let ybar = kernel.iter().zip(&y).map(|(w, v)| w * v).sum::<f64>() / wsum;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (r, (&yi, &wi)) in y.iter().zip(&kernel).enumerate() {
        let fit: f64 = (0..=m).map(|c| design[(r, c)] * beta[c]).sum();
        ss_res += wi * (yi - fit) * (yi - fit);
        ss_tot += wi * (yi - ybar) * (yi - ybar);
    }
    let fit_r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 0.0 };
    Ok(SegmentAttribution {
        segment_bounds: bounds,
        weights: beta[1..].to_vec(),
        intercept: beta[0],
        fit_r2,
        target_value: y[0],
        degenerate: false,
        excluded_all_zero_mask,
    })
}

#[cfg(test)]
mod tests {
    use std::convert::Infallible;

    use proptest::prelude::*;

    use super::*;

    fn ok(v: f64) -> Result<Vec<f64>, Infallible> {
        Ok(vec![v])
    }

    fn context(n: usize) -> Vec<f64> {
        (0..n).map(|i| 1.0 + ((i * 7) % 5) as f64 + i as f64 * 0.1).collect()
    }

    #[test]
    fn uniform_segments() {
        let b = segment_uniform(100, 20).unwrap();
        assert!(b.iter().all(|(a, e)| e - a == 5));
        let b = segment_uniform(10, 3).unwrap();
        assert_eq!(b, vec![(0, 4), (4, 7), (7, 10)]);
        assert_eq!(
            segment_uniform(5, 5).unwrap(),
            (0..5).map(|i| (i, i + 1)).collect::<Vec<_>>()
        );
        assert!(matches!(
            segment_uniform(3, 4),
            Err(ExplainError::TooManySegments { .. })
        ));
        assert!(segment_uniform(3, 0).is_err());
    }

    #[test]
    fn perturbation_strategies() {
        let ctx = [2.0, 4.0, 1.0, 5.0];
        let b = segment_uniform(4, 2).unwrap();
        assert_eq!(perturb(&ctx, &b, &[true, true], Perturbation::Zero), ctx.to_vec());
        assert_eq!(perturb(&ctx, &b, &[false, false], Perturbation::Zero), vec![0.0; 4]);
        assert_eq!(
            perturb(&ctx, &b, &[false, true], Perturbation::LocalMean),
            vec![3.0, 3.0, 1.0, 5.0]
        );
        assert_eq!(
            perturb(&ctx, &b, &[true, false], Perturbation::InverseMax),
            vec![2.0, 4.0, 4.0, 0.0]
        );
    }

    #[test]
    fn explain_target_picks() {
        let f = [3.0, 9.0, 1.0, 4.0];
        assert_eq!(ExplainTarget::FinalValue.pick(&f), Some(4.0));
        assert_eq!(ExplainTarget::FirstValue.pick(&f), Some(3.0));
        assert_eq!(ExplainTarget::Midpoint.pick(&f), Some(1.0));
        assert_eq!(ExplainTarget::Max.pick(&f), Some(9.0));
        assert_eq!(ExplainTarget::Min.pick(&f), Some(1.0));
        assert_eq!(ExplainTarget::Min.pick(&[]), None);
    }

    #[test]
    fn masks_start_with_all_ones_and_skip_all_zero() {
        let cfg = LimeConfig {
            n_segments: 2,
            n_samples: 50,
            ..LimeConfig::default()
        };
        let masks = sample_masks(&cfg);
        assert_eq!(masks.len(), 50);
        assert_eq!(masks[0], vec![true, true]);
        assert!(masks.iter().all(|m| m.iter().any(|b| *b)));
    }

    #[test]
    fn last_segment_model_is_attributed_to_last_segment() {
        let ctx = context(40);
        let cfg = LimeConfig {
            n_segments: 8,
            ..LimeConfig::default()
        };
        let attr = lime_explain(|x: &[f64]| ok(x[35..].iter().sum()), &ctx, &cfg).unwrap();
        let argmax = (0..8)
            .max_by(|&a, &b| attr.weights[a].abs().total_cmp(&attr.weights[b].abs()))
            .unwrap();
        assert_eq!(argmax, 7);
        let oracle: f64 = ctx[35..].iter().sum();
        assert!((attr.weights[7] - oracle).abs() < 1e-6);
        for w in &attr.weights[..7] {
            assert!(w.abs() < 1e-6);
        }
    }

    #[test]
    fn segment_mean_model_recovers_closed_form() {
        let ctx = context(30);
        let coefs = [0.5, -1.0, 2.0, 0.0, 3.0];
        let cfg = LimeConfig {
            n_segments: 5,
            seed: 9,
            ..LimeConfig::default()
        };
        let bounds = segment_uniform(30, 5).unwrap();
        let model = |x: &[f64]| {
            ok(bounds
                .iter()
                .zip(&coefs)
                .map(|(&(a, b), c)| c * x[a..b].iter().sum::<f64>() / (b - a) as f64)
                .sum())
        };
        let attr = lime_explain(model, &ctx, &cfg).unwrap();
        assert!(attr.fit_r2 >= 0.999);
        for (j, &(a, b)) in bounds.iter().enumerate() {
            let mean = ctx[a..b].iter().sum::<f64>() / (b - a) as f64;
            assert!((attr.weights[j] - coefs[j] * mean).abs() < 1e-6);
            if coefs[j] != 0.0 {
                assert_eq!(attr.weights[j].signum(), coefs[j].signum());
            }
        }
        assert!(attr.intercept.abs() < 1e-6);
    }

    #[test]
    fn constant_model_is_degenerate() {
        let attr = lime_explain(|_: &[f64]| ok(4.0), &context(20), &LimeConfig::default()).unwrap();
        assert!(attr.degenerate);
        assert_eq!(attr.weights, vec![0.0; 20]);
        assert_eq!(attr.fit_r2, 0.0);
    }

    #[test]
    fn all_zero_context_is_degenerate_under_zero_perturbation() {
        let attr = lime_explain(
            |x: &[f64]| ok(x.iter().sum::<f64>() * 2.0),
            &[0.0; 24],
            &LimeConfig::default(),
        )
        .unwrap();
        assert!(attr.degenerate);
        assert!(attr.excluded_all_zero_mask);
        assert!(attr.weights.iter().all(|w| *w == 0.0));
    }

    #[test]
    fn monotone_model_gets_nonnegative_weights_under_zero_perturbation() {
        let ctx = context(40);
        let model = |x: &[f64]| {
            ok((1.0
                + x.iter()
                    .enumerate()
                    .map(|(i, v)| v * (1.0 + i as f64 / 10.0))
                    .sum::<f64>())
            .ln())
        };
        let attr = lime_explain(model, &ctx, &LimeConfig::default()).unwrap();
        assert!(attr.weights.iter().all(|w| *w >= 0.0), "{:?}", attr.weights);
    }

    #[test]
    fn model_errors_propagate() {
        let r = lime_explain(
            |_: &[f64]| Err::<Vec<f64>, _>("boom"),
            &context(20),
            &LimeConfig::default(),
        );
        assert!(matches!(r, Err(ExplainError::Model(m)) if m == "boom"));
    }

    #[test]
    fn config_validation() {
        let cfg = LimeConfig {
            n_samples: 10,
            ..LimeConfig::default()
        };
        assert!(matches!(cfg.validate(100), Err(ExplainError::BadConfig(_))));
        assert!(matches!(
            LimeConfig::default().validate(10),
            Err(ExplainError::TooManySegments { .. })
        ));
    }

    proptest! {
        #[test]
        fn segments_tile_context(len in 1usize..300, frac in 0.0f64..1.0) {
            let m = 1 + ((len - 1) as f64 * frac) as usize;
            let b = segment_uniform(len, m).unwrap();
            prop_assert_eq!(b.len(), m);
            prop_assert_eq!(b[0].0, 0);
            prop_assert_eq!(b[m - 1].1, len);
            for w in b.windows(2) {
                prop_assert_eq!(w[0].1, w[1].0);
            }
            let lens: Vec<usize> = b.iter().map(|(a, e)| e - a).collect();
            prop_assert!(lens.iter().max().unwrap() - lens.iter().min().unwrap() <= 1);
        }

        #[test]
        fn same_seed_same_attribution(seed in 0u64..1000) {
            let ctx = context(30);
            let cfg = LimeConfig { n_segments: 6, n_samples: 60, seed, perturbation: Perturbation::LocalMean, ..LimeConfig::default() };
            let model = |x: &[f64]| ok(x.iter().map(|v| v.sin()).sum());
            let a = lime_explain(model, &ctx, &cfg).unwrap();
            let b = lime_explain(model, &ctx, &LimeConfig { serial: true, ..cfg.clone() }).unwrap();
            prop_assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }
}
