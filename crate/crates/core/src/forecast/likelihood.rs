//! Exact Gaussian likelihood of a stationary ARMA process through the
//! innovations algorithm, used to rank CSS-fitted candidates.

use nalgebra::{DMatrix, DVector};

/// Autocovariances `gamma(0..=max_lag)` of `x_t = sum phi_i x_{t-i} + e_t + sum theta_j e_{t-j}`
/// with unit innovation variance. `None` if the AR system is singular.
pub(crate) fn arma_acvf(phi: &[f64], theta: &[f64], max_lag: usize) -> Option<Vec<f64>> {
    let p = phi.len();
    let q = theta.len();
    let th = |j: usize| if j == 0 { 1.0 } else { theta[j - 1] };
    // psi weights up to q.
    let mut psi = vec![0.0; q + 1];
    for j in 0..=q {
        let mut v = th(j);
        for i in 1..=j.min(p) {
            v += phi[i - 1] * psi[j - i];
        }
        psi[j] = v;
    }
    let rhs = |k: usize| -> f64 { (k..=q).map(|j| th(j) * psi[j - k]).sum() };
    // gamma(k) - sum_r phi_r gamma(|k - r|) = rhs(k), k = 0..=p.
    let mut a = DMatrix::<f64>::zeros(p + 1, p + 1);
    let mut b = DVector::<f64>::zeros(p + 1);
    for k in 0..=p {
        a[(k, k)] += 1.0;
        for r in 1..=p {
            a[(k, k.abs_diff(r))] -= phi[r - 1];
        }
        b[k] = rhs(k);
    }
    let sol = a.lu().solve(&b)?;
    let mut gamma: Vec<f64> = sol.iter().copied().collect();
    for k in (p + 1)..=max_lag.max(p) {
        let mut v = rhs(k);
        for r in 1..=p {
            v += phi[r - 1] * gamma[k - r];
        }
        gamma.push(v);
    }
    gamma.truncate(max_lag + 1);
    Some(gamma)
}

/// `-2 log L` with the innovation variance concentrated out, or `None` when
/// the recursion breaks down numerically.
pub(crate) fn neg2_loglik(x: &[f64], phi: &[f64], theta: &[f64]) -> Option<f64> {
    let n = x.len();
    if n == 0 {
        return None;
    }
    let p = phi.len();
    let q = theta.len();
    let m = p.max(q);
    let gamma = arma_acvf(phi, theta, 2 * m + 1)?;
    let th = |j: usize| if j == 0 { 1.0 } else { theta[j - 1] };
    // Covariances of the transformed process (Brockwell & Davis, eq. 5.3.5), 1-based.
    let kappa = |i: usize, j: usize| -> f64 {
        let (lo, hi) = (i.min(j), i.max(j));
        let h = hi - lo;
        if hi <= m {
            gamma[h]
        } else if lo <= m {
            if hi > 2 * m {
                0.0
            } else {
                gamma[h] - (1..=p).map(|r| phi[r - 1] * gamma[r.abs_diff(h)]).sum::<f64>()
            }
        } else if h > q {
            0.0
        } else {
            (0..=q - h).map(|r| th(r) * th(r + h)).sum()
        }
    };

    // rows[k][j - 1] = theta_{k, j}; only j <= q is nonzero once k >= m.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    rows.push(Vec::new());
    v.push(kappa(1, 1));
    for t in 1..n {
        let jmax = if t >= m { q.min(t) } else { t };
        let mut row = vec![0.0; jmax];
        for k in (t - jmax)..t {
            let mut s = kappa(t + 1, k + 1);
            let from = t - jmax;
            for jj in from..k {
                let lag_k = k - jj;
                if lag_k <= rows[k].len() {
                    s -= rows[k][lag_k - 1] * row[t - jj - 1] * v[jj];
                }
            }
            if v[k] <= 0.0 {
                return None;
            }
            row[t - k - 1] = s / v[k];
        }
        let mut vt = kappa(t + 1, t + 1);
        for j in (t - jmax)..t {
            let c = row[t - j - 1];
            vt -= c * c * v[j];
        }
        if !(vt > 0.0 && vt.is_finite()) {
            return None;
        }
        rows.push(row);
        v.push(vt);
    }

    let mut xhat = vec![0.0; n];
    let mut s = 0.0;
    let mut logdet = 0.0;
    for t in 0..n {
        if t > 0 {
            let mut pred = 0.0;
            for (j, c) in rows[t].iter().enumerate() {
                let lag = j + 1;
                pred += c * (x[t - lag] - xhat[t - lag]);
            }
            if t >= m {
                for r in 1..=p {
                    pred += phi[r - 1] * x[t - r];
                }
            }
            xhat[t] = pred;
        }
        let e = x[t] - xhat[t];
        s += e * e / v[t];
        logdet += v[t].ln();
    }
    let nf = n as f64;
    let sigma2 = s / nf;
    // Also rejects NaN.
    if sigma2.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return None;
    }
    Some(nf * (2.0 * std::f64::consts::PI * sigma2).ln() + logdet + nf)
}
