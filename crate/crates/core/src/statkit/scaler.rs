use serde::{Deserialize, Serialize};

/// Smallest admissible scale; constant inputs never divide by zero.
pub const SCALE_FLOOR: f64 = 1e-12;

/// Linear-interpolation quantile (the usual "type 7" definition).
pub fn quantile(x: &[f64], q: f64) -> f64 {
    assert!(!x.is_empty(), "quantile of empty sample");
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Median/IQR scaling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustScalerParams {
    pub center: f64,
    pub scale: f64,
}

impl RobustScalerParams {
    pub fn fit(x: &[f64]) -> Self {
        let iqr = quantile(x, 0.75) - quantile(x, 0.25);
        Self {
            center: quantile(x, 0.5),
            scale: iqr.max(SCALE_FLOOR),
        }
    }

    pub fn identity() -> Self {
        Self {
            center: 0.0,
            scale: 1.0,
        }
    }

    pub fn transform(&self, v: f64) -> f64 {
        (v - self.center) / self.scale
    }

    pub fn inverse(&self, v: f64) -> f64 {
        v * self.scale + self.center
    }

    pub fn transform_all(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&v| self.transform(v)).collect()
    }
}
