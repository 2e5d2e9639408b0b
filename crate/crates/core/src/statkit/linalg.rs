use nalgebra::{DMatrix, DVector};

use super::StatError;

/// Relative pivot threshold below which the normal equations are treated as singular.
const SINGULAR_RTOL: f64 = 1e-12;
const RIDGE_JITTER: f64 = 1e-8;

/// Ordinary least squares with coefficient standard errors.
#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coef: Vec<f64>,
    pub std_err: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// Residual variance `rss / (n - k)`.
    pub sigma2: f64,
}

fn solve_spd(a: DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>), StatError> {
    let k = a.nrows();
    let max_diag = (0..k).map(|i| a[(i, i)]).fold(0.0f64, f64::max);
    let chol = a.clone().cholesky().filter(|c| {
        let l = c.l_dirty();
        (0..k).all(|i| l[(i, i)] * l[(i, i)] > SINGULAR_RTOL * max_diag)
    });
    let chol = match chol {
        Some(c) => c,
        None => {
            let mean_diag = (0..k).map(|i| a[(i, i)]).sum::<f64>() / k.max(1) as f64;
            let jitter = RIDGE_JITTER * if mean_diag > 0.0 { mean_diag } else { 1.0 };
            let ridged = a + DMatrix::identity(k, k) * jitter;
            ridged.cholesky().ok_or(StatError::Singular)?
        }
    };
    Ok((chol.solve(b), chol.inverse()))
}

/// Minimises `sum_i w_i (y_i - x_i . beta)^2` via the normal equations.
///
/// When `X^T W X` is (numerically) singular a ridge of `1e-8` times its mean
/// diagonal is added, so duplicated columns still give finite coefficients.
pub fn wls_fit(x: &DMatrix<f64>, y: &[f64], w: &[f64]) -> Result<Vec<f64>, StatError> {
    if x.nrows() != y.len() || y.len() != w.len() {
        return Err(StatError::ShapeMismatch(format!(
            "X has {} rows, y has {}, w has {}",
            x.nrows(),
            y.len(),
            w.len()
        )));
    }
    if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(StatError::BadWeight);
    }
    let k = x.ncols();
    let mut a = DMatrix::<f64>::zeros(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for (i, row) in x.row_iter().enumerate() {
        if w[i] == 0.0 {
            continue;
        }
        for p in 0..k {
            let wp = w[i] * row[p];
            b[p] += wp * y[i];
            for q in 0..k {
                a[(p, q)] += wp * row[q];
            }
        }
    }
    let (beta, _) = solve_spd(a, &b)?;
    Ok(beta.iter().copied().collect())
}

/// OLS with an explicit design matrix (include a column of ones for an intercept).
pub fn ols_fit(x: &DMatrix<f64>, y: &[f64]) -> Result<OlsFit, StatError> {
    let n = x.nrows();
    let k = x.ncols();
    if n != y.len() {
        return Err(StatError::ShapeMismatch(format!("X has {n} rows, y has {}", y.len())));
    }
    if n <= k {
        return Err(StatError::TooShort { needed: k + 1, have: n });
    }
    let yv = DVector::from_column_slice(y);
    let xt = x.transpose();
    let (beta, inv) = solve_spd(&xt * x, &(&xt * &yv))?;
    let fitted = x * &beta;
    let residuals: Vec<f64> = y.iter().zip(fitted.iter()).map(|(a, b)| a - b).collect();
    let rss: f64 = residuals.iter().map(|r| r * r).sum();
    let sigma2 = rss / (n - k) as f64;
    let std_err = (0..k).map(|i| (sigma2 * inv[(i, i)]).max(0.0).sqrt()).collect();
    Ok(OlsFit {
        coef: beta.iter().copied().collect(),
        std_err,
        residuals,
        rss,
        sigma2,
    })
}
