//! Seasonal ARIMA fitted by conditional sum of squares on robust-scaled data.
//!
//! The differencing order `d` comes from a joint ADF/KPSS screen. `(p, q)` and
//! the seasonal `(P, D, Q)` are chosen by AIC over a grid. Forecasts are
//! produced on the scaled, differenced series and integrated back before the
//! scaling is undone, so fitting `a*x + b` (with `a > 0`) reproduces
//! `a * forecast(x) + b`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::neg2_loglik;
use super::optim::{nelder_mead_restarts, SimplexOptions};
use super::{ContextPolicy, Forecast, ForecastError, Forecaster};
use crate::data::{Domain, DomainProfile, SplitSeries, TimeSeries};
use crate::statkit::{acf_peak, adf_test, kpss_test, ols_fit, RobustScalerParams};

const Z_95: f64 = 1.959_963_984_540_054;
const MIN_TRAIN: usize = 20;
const UNIT_ROOT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeasonalOrder {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub s: usize,
}

/// Search limits for [`arima_select`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ArimaConfig {
    pub max_p: usize,
    pub max_q: usize,
    /// Include the `(P, D, Q) in {0,1}^3` grid when the data allows it.
    pub seasonal: bool,
    /// Overrides the profile's seasonal period.
    pub seasonal_period: Option<usize>,
    /// Extra simplex runs from the best point after the first one.
    pub restarts: usize,
}

impl Default for ArimaConfig {
    fn default() -> Self {
        Self {
            max_p: 5,
            max_q: 5,
            seasonal: true,
            seasonal_period: None,
            restarts: 3,
        }
    }
}

/// A fitted model. Coefficients follow the sign convention
/// `(1 - sum ar_i B^i)(1 - sum sar_j B^js) w_t = (1 + sum ma_i B^i)(1 + sum sma_j B^js) e_t`
/// where `w` is the differenced, scaled series minus `intercept`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub order: (usize, usize, usize),
    pub seasonal: Option<SeasonalOrder>,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub sar: Vec<f64>,
    pub sma: Vec<f64>,
    /// Mean of the differenced scaled series; zero whenever any differencing is applied.
    pub intercept: f64,
    pub scaler: RobustScalerParams,
    pub aic: f64,
    /// Innovation variance on the scaled series.
    pub sigma2: f64,
    /// Set when no grid candidate survived and the random-walk fallback was used.
    pub fallback: bool,
}

/// Sparse lag polynomial terms `(lag, coef)`.
type Terms = Vec<(usize, f64)>;

impl ArimaModel {
    fn period(&self) -> usize {
        self.seasonal.map_or(1, |s| s.s)
    }

    fn seasonal_d(&self) -> usize {
        self.seasonal.map_or(0, |s| s.d)
    }

    /// Largest AR lag on the differenced series; residuals before it are zero.
    fn conditioning(&self) -> usize {
        self.order.0 + self.period() * self.sar.len()
    }

    /// Shortest history for which a forecast is defined.
    pub fn min_history(&self) -> usize {
        self.order.1 + self.period() * self.seasonal_d() + self.conditioning() + 1
    }

    fn ar_terms(&self) -> Terms {
        multiply(&self.ar, &self.sar, self.period(), -1.0)
    }

    fn ma_terms(&self) -> Terms {
        multiply(&self.ma, &self.sma, self.period(), 1.0)
    }

    pub fn n_params(&self) -> usize {
        self.ar.len() + self.ma.len() + self.sar.len() + self.sma.len()
    }
}

/// Expands `(1 + sign*A(B))(1 + sign*S(B^s))` into `1 + sign*sum c_k B^k` and
/// returns the `c_k`, so AR terms (sign -1) read `w_t = sum c_k w_{t-k} + ...`.
fn multiply(a: &[f64], sa: &[f64], s: usize, sign: f64) -> Terms {
    let mut out: Terms = Vec::with_capacity(a.len() + sa.len() * (1 + a.len()));
    for (i, &c) in a.iter().enumerate() {
        out.push((i + 1, c));
    }
    for (j, &cs) in sa.iter().enumerate() {
        let lag = (j + 1) * s;
        out.push((lag, cs));
        for (i, &c) in a.iter().enumerate() {
            out.push((lag + i + 1, sign * c * cs));
        }
    }
    let mut dense: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    for (lag, c) in out {
        *dense.entry(lag).or_insert(0.0) += c;
    }
    dense.into_iter().collect()
}

/// Coefficients of `(1 - B)^d (1 - B^s)^D` as a dense vector, index = lag.
fn diff_poly(d: usize, big_d: usize, s: usize) -> Vec<f64> {
    let mut poly = vec![1.0];
    let mut mul = |lag: usize| {
        let mut next = vec![0.0; poly.len() + lag];
        for (k, &c) in poly.iter().enumerate() {
            next[k] += c;
            next[k + lag] -= c;
        }
        poly = next;
    };
    for _ in 0..d {
        mul(1);
    }
    for _ in 0..big_d {
        mul(s);
    }
    poly
}

fn difference(z: &[f64], d: usize, big_d: usize, s: usize) -> Vec<f64> {
    let mut w = z.to_vec();
    for _ in 0..d {
        w = w.windows(2).map(|p| p[1] - p[0]).collect();
    }
    for _ in 0..big_d {
        w = (s..w.len()).map(|t| w[t] - w[t - s]).collect();
    }
    w
}

/// CSS residuals with `e_t = 0` for `t < cond`.
fn residuals(w: &[f64], ar: &Terms, ma: &Terms, cond: usize) -> Vec<f64> {
    let mut e = vec![0.0; w.len()];
    for t in cond..w.len() {
        let mut v = w[t];
        for &(lag, c) in ar {
            v -= c * w[t - lag];
        }
        for &(lag, c) in ma {
            if lag <= t {
                v -= c * e[t - lag];
            }
        }
        e[t] = v;
    }
    e
}

fn sse(w: &[f64], ar: &Terms, ma: &Terms, cond: usize) -> f64 {
    residuals(w, ar, ma, cond)[cond..].iter().map(|v| v * v).sum()
}

/// True when all roots of `1 + sign*sum c_i z^i` lie outside the unit circle,
/// via the step-down (reflection coefficient) recursion.
fn roots_outside_unit_circle(coefs: &[f64], sign: f64) -> bool {
    if coefs.iter().any(|c| !c.is_finite()) {
        return false;
    }
    // Rewrite as 1 - sum phi_i z^i.
    let mut phi: Vec<f64> = coefs.iter().map(|c| -sign * c).collect();
    while let Some(&kappa) = phi.last() {
        if kappa.abs() >= 1.0 - UNIT_ROOT_MARGIN {
            return false;
        }
        let k = phi.len();
        let denom = 1.0 - kappa * kappa;
        phi = (0..k - 1).map(|i| (phi[i] + kappa * phi[k - 2 - i]) / denom).collect();
    }
    true
}

/// Stationarity of the AR part, checked factor by factor.
pub fn is_stationary(ar: &[f64], sar: &[f64]) -> bool {
    roots_outside_unit_circle(ar, -1.0) && roots_outside_unit_circle(sar, -1.0)
}

fn is_invertible(ma: &[f64], sma: &[f64]) -> bool {
    roots_outside_unit_circle(ma, 1.0) && roots_outside_unit_circle(sma, 1.0)
}

/// Smallest `d` whose differenced series rejects a unit root (ADF, 5%) and
/// does not reject level stationarity (KPSS, 5%). Falls back to the smallest
/// ADF-only pass, and then to 2.
pub fn select_d(z: &[f64]) -> usize {
    let mut adf_only = None;
    for d in 0..=2 {
        let w = difference(z, d, 0, 1);
        let Ok(adf) = adf_test(&w) else { break };
        let adf_rejects = adf.reject_at(0.05) == Some(true);
        let kpss_rejects = kpss_test(&w).map(|k| k.reject_at(0.05) == Some(true)).unwrap_or(true);
        if adf_rejects && !kpss_rejects {
            return d;
        }
        if adf_rejects && adf_only.is_none() {
            adf_only = Some(d);
        }
    }
    adf_only.unwrap_or(2)
}

/// Seasonal period: explicit override, then the profile, then (for custom
/// profiles with `s = 1`) the ACF peak.
fn resolve_period(z: &[f64], profile: &DomainProfile, config: &ArimaConfig) -> usize {
    if let Some(s) = config.seasonal_period {
        return s.max(1);
    }
    if profile.seasonal_period > 1 || profile.name != Domain::Custom {
        return profile.seasonal_period.max(1);
    }
    let max_lag = (z.len() / 4).min(400);
    if max_lag < 2 {
        return 1;
    }
    acf_peak(z, max_lag).unwrap_or(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Candidate {
    p: usize,
    q: usize,
    sp: usize,
    sd: usize,
    sq: usize,
}

struct FitInput<'a> {
    z: &'a [f64],
    d: usize,
    s: usize,
    scaler: RobustScalerParams,
    /// Rank by exact Gaussian likelihood instead of the CSS sum of squares.
    exact: bool,
}

/// Largest expanded lag for which the exact likelihood is used.
const EXACT_MAX_LAG: usize = 64;

fn dense(terms: &Terms) -> Vec<f64> {
    let len = terms.last().map_or(0, |t| t.0);
    let mut out = vec![0.0; len];
    for &(lag, c) in terms {
        out[lag - 1] = c;
    }
    out
}

fn ols_ar(w: &[f64], p: usize) -> Option<Vec<f64>> {
    if p == 0 {
        return Some(vec![]);
    }
    let rows = w.len().checked_sub(p)?;
    if rows <= p {
        return None;
    }
    let x = DMatrix::from_fn(rows, p, |r, c| w[r + p - c - 1]);
    let y = &w[p..];
    ols_fit(&x, y).ok().map(|f| f.coef)
}

/// Hannan-Rissanen starting values for the non-seasonal ARMA part.
fn hannan_rissanen(w: &[f64], p: usize, q: usize) -> (Vec<f64>, Vec<f64>) {
    let zeros = || (vec![0.0; p], vec![0.0; q]);
    if q == 0 {
        return (ols_ar(w, p).unwrap_or_else(|| vec![0.0; p]), vec![]);
    }
    let n = w.len();
    let m = ((10.0 * (n as f64).log10()).round() as usize).max(p + q + 1).min(n / 4);
    if m == 0 {
        return zeros();
    }
    let Some(long) = ols_ar(w, m) else { return zeros() };
    let mut e = vec![0.0; n];
    for t in m..n {
        e[t] = w[t] - (0..m).map(|i| long[i] * w[t - i - 1]).sum::<f64>();
    }
    let start = m + q.max(p);
    if n <= start + p + q + 1 {
        return zeros();
    }
    let x = DMatrix::from_fn(n - start, p + q, |r, c| {
        let t = r + start;
        if c < p {
            w[t - c - 1]
        } else {
            e[t - (c - p) - 1]
        }
    });
    match ols_fit(&x, &w[start..]) {
        Ok(f) if is_stationary(&f.coef[..p], &[]) && is_invertible(&f.coef[p..], &[]) => {
            (f.coef[..p].to_vec(), f.coef[p..].to_vec())
        }
        _ => (ols_ar(w, p).unwrap_or_else(|| vec![0.0; p]), vec![0.0; q]),
    }
}

fn fit_candidate(input: &FitInput<'_>, cand: Candidate, restarts: usize) -> Option<ArimaModel> {
    let s = input.s;
    let w_raw = difference(input.z, input.d, cand.sd, s);
    let intercept = if input.d == 0 && cand.sd == 0 {
        w_raw.iter().sum::<f64>() / w_raw.len().max(1) as f64
    } else {
        0.0
    };
    let w: Vec<f64> = w_raw.iter().map(|v| v - intercept).collect();
    let cond = cand.p + s * cand.sp;
    let k = cand.p + cand.q + cand.sp + cand.sq;
    // Require enough effective observations for a meaningful AIC.
    if w.len() <= cond + k + 2 {
        return None;
    }
    let n_eff = (w.len() - cond) as f64;
    let seasonal = (cand.sp + cand.sd + cand.sq > 0).then_some(SeasonalOrder {
        p: cand.sp,
        d: cand.sd,
        q: cand.sq,
        s,
    });
    let split = |x: &[f64]| {
        let (ar, rest) = x.split_at(cand.p);
        let (ma, rest) = rest.split_at(cand.q);
        let (sar, sma) = rest.split_at(cand.sp);
        (ar.to_vec(), ma.to_vec(), sar.to_vec(), sma.to_vec())
    };

    let (params, value) = if cand.q + cand.sp + cand.sq == 0 {
        // Pure AR: CSS is exactly least squares on the lagged design.
        let ar = ols_ar(&w, cand.p)?;
        let v = sse(&w, &multiply(&ar, &[], s, -1.0), &vec![], cond);
        (ar, v)
    } else {
        let (ar0, ma0) = hannan_rissanen(&w, cand.p, cand.q);
        let mut x0 = ar0;
        x0.extend(ma0);
        x0.extend(std::iter::repeat_n(0.0, cand.sp + cand.sq));
        let objective = |x: &[f64]| {
            let (ar, ma, sar, sma) = split(x);
            if !is_invertible(&ma, &sma) {
                return f64::INFINITY;
            }
            sse(&w, &multiply(&ar, &sar, s, -1.0), &multiply(&ma, &sma, s, 1.0), cond)
        };
        let opts = SimplexOptions {
            max_evals: 300 + 200 * k,
            ftol: 1e-9,
            ..SimplexOptions::default()
        };
        let res = nelder_mead_restarts(objective, &x0, opts, restarts);
        if !res.converged {
            log::debug!("simplex budget exhausted for {cand:?} after {} evaluations", res.evals);
        }
        (res.x, res.value)
    };
    if !value.is_finite() {
        return None;
    }
    let (ar, ma, sar, sma) = split(&params);
    if !is_stationary(&ar, &sar) {
        return None;
    }
    let sigma2 = value / n_eff;
    let n_coef = k + 1 + usize::from(input.d == 0 && cand.sd == 0);
    let fit_term = if input.exact {
        let phi = dense(&multiply(&ar, &sar, s, -1.0));
        let theta = dense(&multiply(&ma, &sma, s, 1.0));
        neg2_loglik(&w, &phi, &theta)?
    } else {
        n_eff * sigma2.max(f64::MIN_POSITIVE).ln()
    };
    let aic = fit_term + 2.0 * n_coef as f64;
    Some(ArimaModel {
        order: (cand.p, input.d, cand.q),
        seasonal,
        ar,
        ma,
        sar,
        sma,
        intercept,
        scaler: input.scaler,
        aic,
        sigma2,
        fallback: false,
    })
}

fn random_walk(z: &[f64], scaler: RobustScalerParams) -> ArimaModel {
    let w = difference(z, 1, 0, 1);
    let n = w.len().max(1) as f64;
    let sigma2 = w.iter().map(|v| v * v).sum::<f64>() / n;
    ArimaModel {
        order: (0, 1, 0),
        seasonal: None,
        ar: vec![],
        ma: vec![],
        sar: vec![],
        sma: vec![],
        intercept: 0.0,
        scaler,
        aic: n * sigma2.max(f64::MIN_POSITIVE).ln() + 2.0,
        sigma2,
        fallback: true,
    }
}

/// Chooses `d` by the ADF/KPSS screen and `(p, q)(P, D, Q)_s` by AIC, fitting
/// every candidate by CSS. Candidates with a non-stationary AR part are
/// discarded; if none survive the random-walk model is returned with
/// `fallback` set.
pub fn arima_select(train: &[f64], profile: &DomainProfile, config: &ArimaConfig) -> Result<ArimaModel, ForecastError> {
    if train.len() < MIN_TRAIN {
        return Err(ForecastError::TooShort {
            needed: MIN_TRAIN,
            have: train.len(),
        });
    }
    let scaler = RobustScalerParams::fit(train);
    let z = scaler.transform_all(train);
    let d = select_d(&z);
    let s = resolve_period(&z, profile, config);
    let seasonal_grid = config.seasonal && s > 1 && train.len() >= 4 * s;
    let seasonal_range = if seasonal_grid { 0..=1 } else { 0..=0 };

    let mut candidates = Vec::new();
    for p in 0..=config.max_p {
        for q in 0..=config.max_q {
            for sp in seasonal_range.clone() {
                for sd in seasonal_range.clone() {
                    for sq in seasonal_range.clone() {
                        candidates.push(Candidate { p, q, sp, sd, sq });
                    }
                }
            }
        }
    }
    let top = config.max_p.max(config.max_q);
    let max_lag = if seasonal_grid { 2 * top + s } else { top };
    let input = FitInput {
        z: &z,
        d,
        s,
        scaler,
        exact: max_lag <= EXACT_MAX_LAG,
    };
    let fitted: Vec<(Candidate, ArimaModel)> = candidates
        .par_iter()
        .filter_map(|&c| fit_candidate(&input, c, config.restarts).map(|m| (c, m)))
        .collect();
    let best = fitted
        .into_iter()
        .min_by(|a, b| a.1.aic.total_cmp(&b.1.aic).then(a.0.cmp(&b.0)))
        .map(|(_, m)| m);
    Ok(match best {
        Some(m) => {
            log::debug!("arima selected {:?} {:?} aic={:.3}", m.order, m.seasonal, m.aic);
            m
        }
        None => {
            log::warn!("no ARIMA candidate survived; using random-walk fallback");
            random_walk(&z, scaler)
        }
    })
}

/// Refits the coefficients of `template`'s order on `train`, keeping the order fixed.
pub fn arima_refit(template: &ArimaModel, train: &[f64]) -> Result<ArimaModel, ForecastError> {
    if train.len() < MIN_TRAIN {
        return Err(ForecastError::TooShort {
            needed: MIN_TRAIN,
            have: train.len(),
        });
    }
    let scaler = RobustScalerParams::fit(train);
    let z = scaler.transform_all(train);
    if template.fallback {
        return Ok(random_walk(&z, scaler));
    }
    let input = FitInput {
        z: &z,
        d: template.order.1,
        s: template.period(),
        scaler,
        exact: template.conditioning() + template.ma_terms().last().map_or(0, |t| t.0) <= EXACT_MAX_LAG,
    };
    let cand = Candidate {
        p: template.order.0,
        q: template.order.2,
        sp: template.sar.len(),
        sd: template.seasonal_d(),
        sq: template.sma.len(),
    };
    fit_candidate(&input, cand, ArimaConfig::default().restarts).ok_or(ForecastError::NoConvergedCandidate)
}

/// `psi` weights of the integrated model, `psi_0 = 1`.
fn psi_weights(model: &ArimaModel, n: usize) -> Vec<f64> {
    let dpoly = diff_poly(model.order.1, model.seasonal_d(), model.period());
    let ar = model.ar_terms();
    let max_ar = ar.last().map_or(0, |t| t.0);
    // phi*(B) = phi(B) * Delta(B), written as 1 - sum star_k B^k.
    let mut phi = vec![0.0; max_ar + 1];
    phi[0] = 1.0;
    for &(lag, c) in &ar {
        phi[lag] -= c;
    }
    let mut full = vec![0.0; phi.len() + dpoly.len() - 1];
    for (i, a) in phi.iter().enumerate() {
        for (j, b) in dpoly.iter().enumerate() {
            full[i + j] += a * b;
        }
    }
    let star: Vec<f64> = full.iter().map(|v| -v).collect();
    let ma = model.ma_terms();
    let mut theta = vec![0.0; n];
    for &(lag, c) in &ma {
        if lag < n {
            theta[lag] = c;
        }
    }
    let mut psi = vec![0.0; n];
    for j in 0..n {
        let mut v = if j == 0 { 1.0 } else { theta[j] };
        for k in 1..=j.min(star.len() - 1) {
            v += star[k] * psi[j - k];
        }
        psi[j] = v;
    }
    psi
}

/// Forecasts `horizon` steps after `history` with fixed coefficients.
pub fn forecast_from(model: &ArimaModel, history: &[f64], horizon: usize) -> Result<Forecast, ForecastError> {
    let needed = model.min_history();
    if history.len() < needed {
        return Err(ForecastError::TooShort {
            needed,
            have: history.len(),
        });
    }
    let (d, big_d, s) = (model.order.1, model.seasonal_d(), model.period());
    let mut z = model.scaler.transform_all(history);
    let mut w: Vec<f64> = difference(&z, d, big_d, s)
        .iter()
        .map(|v| v - model.intercept)
        .collect();
    let ar = model.ar_terms();
    let ma = model.ma_terms();
    let mut e = residuals(&w, &ar, &ma, model.conditioning());
    let dpoly = diff_poly(d, big_d, s);

    let mut point = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let t = w.len();
        let mut next = 0.0;
        for &(lag, c) in &ar {
            next += c * w[t - lag];
        }
        for &(lag, c) in &ma {
            if lag <= t {
                next += c * e[t - lag];
            }
        }
        w.push(next);
        e.push(0.0);
        // Undo differencing: z_t = (w_t + mu) - sum_{k>=1} delta_k z_{t-k}.
        let tz = z.len();
        let mut zt = next + model.intercept;
        for (k, &c) in dpoly.iter().enumerate().skip(1) {
            zt -= c * z[tz - k];
        }
        z.push(zt);
        point.push(model.scaler.inverse(zt));
    }
    let psi = psi_weights(model, horizon);
    let mut cum = 0.0;
    let interval = point
        .iter()
        .zip(&psi)
        .map(|(&p, &ps)| {
            cum += ps * ps;
            let half = Z_95 * (model.sigma2 * cum).sqrt() * model.scaler.scale;
            (p - half, p + half)
        })
        .collect();
    Ok(Forecast {
        point,
        interval: Some(interval),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RollingOptions {
    /// Refit coefficients (order fixed) on all observed data before every step.
    pub refit: bool,
}

/// One-step-ahead forecasts over the whole test segment. Before each step the
/// window holds the last `max(w, min_history)` observed values, so true test
/// values enter as they become known.
pub fn arima_forecast_rolling(
    model: &ArimaModel,
    split: &SplitSeries,
    profile: &DomainProfile,
    options: RollingOptions,
) -> Result<Forecast, ForecastError> {
    let full = split.full_values();
    let start = split.split_index;
    let mut point = Vec::with_capacity(split.test.len());
    let mut interval = Vec::with_capacity(split.test.len());
    let mut current = model.clone();
    for t in start..full.len() {
        if options.refit && t > start {
            current = arima_refit(model, &full[..t])?;
        }
        let window = profile.arima_rolling_window.max(current.min_history());
        let history = &full[t.saturating_sub(window)..t];
        let fc = forecast_from(&current, history, 1)?;
        point.push(fc.point[0]);
        interval.push(fc.interval.as_ref().map_or((f64::NAN, f64::NAN), |i| i[0]));
    }
    Ok(Forecast {
        point,
        interval: Some(interval),
    })
}

/// [`Forecaster`] wrapper; `predict` conditions on the whole context it is given.
#[derive(Debug, Clone, Default)]
pub struct ArimaForecaster {
    pub config: ArimaConfig,
    pub model: Option<ArimaModel>,
}

impl ArimaForecaster {
    pub fn new(config: ArimaConfig) -> Self {
        Self { config, model: None }
    }
}

impl Forecaster for ArimaForecaster {
    fn name(&self) -> &str {
        "arima"
    }

    fn fit(&mut self, train: &TimeSeries, profile: &DomainProfile) -> Result<(), ForecastError> {
        self.model = Some(arima_select(train.values(), profile, &self.config)?);
        Ok(())
    }

    fn predict(&self, context: &TimeSeries, horizon: usize) -> Result<Forecast, ForecastError> {
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| ForecastError::NotFitted("arima".into()))?;
        forecast_from(model, context.values(), horizon)
    }

    fn context_policy(&self) -> ContextPolicy {
        ContextPolicy::FullHistory
    }
}
