use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{mean, sample_variance, LevelDecision, StatError, TestResult};

/// Confidence levels evaluated by [`t_test_two_sample`], strictest first.
pub const CONFIDENCE_LEVELS: [(&str, f64); 3] = [("95%", 0.95), ("75%", 0.75), ("60%", 0.60)];

fn two_sided_critical(confidence: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    dist.inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

/// Welch's unequal-variance two-sample t-test, two-sided, at 95/75/60%
/// confidence.
///
/// When both samples have zero variance the statistic is 0 if the means agree
/// (no rejection) and signed infinity otherwise (rejection at every level);
/// the pooled `n_a + n_b - 2` degrees of freedom are then used for the
/// reported critical values.
pub fn t_test_two_sample(a: &[f64], b: &[f64]) -> Result<TestResult, StatError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatError::TooShort {
                needed: 2,
                have: s.len(),
            });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (qa, qb) = (sample_variance(a) / na, sample_variance(b) / nb);
    let se2 = qa + qb;
    let (statistic, df) = if se2 > 0.0 {
        let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
        ((ma - mb) / se2.sqrt(), df)
    } else {
        let diff = ma - mb;
        let stat = if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        (stat, na + nb - 2.0)
    };
    let levels = CONFIDENCE_LEVELS
        .iter()
        .map(|(label, conf)| {
            let critical = two_sided_critical(*conf, df);
            LevelDecision {
                label: label.to_string(),
                alpha: 1.0 - conf,
                critical,
                reject: statistic.abs() > critical,
            }
        })
        .collect();
    Ok(TestResult {
        statistic,
        df: Some(df),
        lags: None,
        levels,
    })
}
