use std::f64::consts::PI;

use chrono::{TimeZone, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{DataError, Freq, TimeSeries};

/// Synthetic generator families used for tests and desk-scale reproductions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SynthSpec {
    /// `x_t = phi x_{t-1} + sigma e_t`, started at 0.
    Ar1 { phi: f64, sigma: f64 },
    /// `level + amplitude sin(2 pi (t mod period) / period) + noise e_t`.
    Seasonal {
        period: usize,
        amplitude: f64,
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        level: f64,
    },
    /// Independent Poisson counts.
    SparsePoisson { rate: f64 },
    /// Cumulative Gaussian steps with optional drift.
    RandomWalk {
        sigma: f64,
        #[serde(default)]
        drift: f64,
    },
    /// `level + slope t + noise e_t`.
    Trend {
        slope: f64,
        #[serde(default)]
        noise: f64,
        #[serde(default)]
        level: f64,
    },
}

fn check(ok: bool, msg: &str) -> Result<(), DataError> {
    if ok {
        Ok(())
    } else {
        Err(DataError::BadParams(msg.to_string()))
    }
}

/// Deterministic for `(spec, length, seed)`. Series start 2024-01-01 (a Monday).
pub fn synth(spec: &SynthSpec, length: usize, seed: u64, freq: Freq) -> Result<TimeSeries, DataError> {
    check(length > 0, "length must be positive")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = |rng: &mut ChaCha8Rng| std_normal.sample(rng);
    let values: Vec<f64> = match *spec {
        SynthSpec::Ar1 { phi, sigma } => {
            check(sigma >= 0.0 && sigma.is_finite(), "sigma must be finite and >= 0")?;
            check(phi.is_finite(), "phi must be finite")?;
            let mut x = 0.0;
            (0..length)
                .map(|_| {
                    x = phi * x + sigma * noise(&mut rng);
                    x
                })
                .collect()
        }
        SynthSpec::Seasonal {
            period,
            amplitude,
            noise: sd,
            level,
        } => {
            check(period > 0, "period must be positive")?;
            check(sd >= 0.0, "noise must be >= 0")?;
            (0..length)
                .map(|t| {
                    let phase = 2.0 * PI * (t % period) as f64 / period as f64;
                    let e = if sd > 0.0 { sd * noise(&mut rng) } else { 0.0 };
                    level + amplitude * phase.sin() + e
                })
                .collect()
        }
        SynthSpec::SparsePoisson { rate } => {
            check(rate > 0.0 && rate.is_finite(), "rate must be positive")?;
            let dist = Poisson::new(rate).map_err(|e| DataError::BadParams(e.to_string()))?;
            (0..length).map(|_| dist.sample(&mut rng)).collect()
        }
        SynthSpec::RandomWalk { sigma, drift } => {
            check(sigma >= 0.0 && sigma.is_finite(), "sigma must be finite and >= 0")?;
            let mut x = 0.0;
            (0..length)
                .map(|_| {
                    x += drift + sigma * noise(&mut rng);
                    x
                })
                .collect()
        }
        SynthSpec::Trend {
            slope,
            noise: sd,
            level,
        } => {
            check(sd >= 0.0, "noise must be >= 0")?;
            (0..length)
                .map(|t| {
                    let e = if sd > 0.0 { sd * noise(&mut rng) } else { 0.0 };
                    level + slope * t as f64 + e
                })
                .collect()
        }
    };
    let start = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    TimeSeries::new(format!("synth-{seed}"), start, freq, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acf_direct(x: &[f64], lag: usize) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let den: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
        let num: f64 = (lag..x.len()).map(|t| (x[t] - m) * (x[t - lag] - m)).sum();
        num / den
    }

    #[test]
    fn deterministic_per_seed() {
        let spec = SynthSpec::Ar1 { phi: 0.5, sigma: 1.0 };
        let a = synth(&spec, 50, 3, Freq::Hourly).unwrap();
        let b = synth(&spec, 50, 3, Freq::Hourly).unwrap();
        let c = synth(&spec, 50, 4, Freq::Hourly).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn ar1_with_zero_phi_is_white_noise() {
        let s = synth(&SynthSpec::Ar1 { phi: 0.0, sigma: 1.0 }, 100, 7, Freq::Hourly).unwrap();
        let mean = s.values().iter().sum::<f64>() / 100.0;
        assert!(mean.abs() < 3.0 / 10.0, "mean {mean}");
    }

    #[test]
    fn seasonal_acf_peaks_at_period() {
        let spec = SynthSpec::Seasonal {
            period: 24,
            amplitude: 10.0,
            noise: 1.0,
            level: 0.0,
        };
        let s = synth(&spec, 480, 11, Freq::Hourly).unwrap();
        assert!(acf_direct(s.values(), 24) > acf_direct(s.values(), 13));
    }

    #[test]
    fn sparse_poisson_is_mostly_zero() {
        // P(X = 0) = exp(-0.3); the binomial tail P(#zeros >= 26 of 51) is > 0.999.
        let p0 = (-0.3f64).exp();
        let tail: f64 = (26..=51u32)
            .map(|k| {
                let ln_choose: f64 = (1..=k).map(|i| ((51 - k + i) as f64 / i as f64).ln()).sum();
                (ln_choose + k as f64 * p0.ln() + (51 - k) as f64 * (1.0 - p0).ln()).exp()
            })
            .sum();
        assert!(tail > 0.999, "tail {tail}");
        let s = synth(&SynthSpec::SparsePoisson { rate: 0.3 }, 51, 5, Freq::Monthly).unwrap();
        let zeros = s.values().iter().filter(|v| **v == 0.0).count();
        assert!(zeros * 2 >= 51, "zeros {zeros}");
    }

    #[test]
    fn bad_params() {
        assert!(synth(&SynthSpec::SparsePoisson { rate: -1.0 }, 10, 0, Freq::Monthly).is_err());
        assert!(synth(&SynthSpec::Ar1 { phi: 0.1, sigma: 1.0 }, 0, 0, Freq::Monthly).is_err());
        let bad = SynthSpec::Seasonal {
            period: 0,
            amplitude: 1.0,
            noise: 0.0,
            level: 0.0,
        };
        assert!(synth(&bad, 10, 0, Freq::Hourly).is_err());
    }

    #[test]
    fn noise_free_seasonal_repeats_exactly() {
        let spec = SynthSpec::Seasonal {
            period: 24,
            amplitude: 3.0,
            noise: 0.0,
            level: 10.0,
        };
        let s = synth(&spec, 100, 0, Freq::Hourly).unwrap();
        for t in 24..100 {
            assert_eq!(s.values()[t].to_bits(), s.values()[t - 24].to_bits());
        }
    }
}
