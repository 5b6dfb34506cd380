//! Small dense least-squares helpers and a Levenberg-Marquardt driver for
//! variable-projection fits.

/// Solves the square system `a x = b` (row-major `n x n`) by Gaussian
/// elimination with partial pivoting.
pub fn solve(mut a: Vec<f64>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r * n + col].abs().total_cmp(&a[s * n + col].abs()))?;
        if a[piv * n + col].abs() < 1e-300 {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(piv * n + c, col * n + c);
            }
            b.swap(piv, col);
        }
        for r in col + 1..n {
            let f = a[r * n + col] / a[col * n + col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r * n + c] * x[c];
        }
        x[r] = s / a[r * n + r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Linear least squares `min |A c - y|` for a column-major design matrix
/// given as a list of columns. Returns coefficients and residual vector.
pub fn linear_lsq(columns: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let p = columns.len();
    // column scaling keeps the normal equations well conditioned
    let scale: Vec<f64> = columns
        .iter()
        .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300))
        .collect();
    let mut ata = vec![0.0; p * p];
    let mut aty = vec![0.0; p];
    for a in 0..p {
        for b in a..p {
            let s: f64 = columns[a].iter().zip(&columns[b]).map(|(x, y)| x * y).sum();
            let s = s / (scale[a] * scale[b]);
            ata[a * p + b] = s;
            ata[b * p + a] = s;
        }
        aty[a] = columns[a].iter().zip(y).map(|(x, y)| x * y).sum::<f64>() / scale[a];
    }
    for d in 0..p {
        ata[d * p + d] += 1e-13;
    }
    let c: Vec<f64> = solve(ata, aty)?.iter().zip(&scale).map(|(c, s)| c / s).collect();
    let mut r = y.to_vec();
    for (col, &ci) in columns.iter().zip(&c) {
        for (ri, v) in r.iter_mut().zip(col) {
            *ri -= ci * v;
        }
    }
    Some((c, r))
}

/// Levenberg-Marquardt on a residual function with forward-difference
/// Jacobian. `steps` gives the finite-difference step per parameter.
pub fn levenberg_marquardt<F>(mut theta: Vec<f64>, steps: &[f64], max_iter: usize, residual: F) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let p = theta.len();
    let cost = |r: &[f64]| r.iter().map(|v| v * v).sum::<f64>();
    let Some(mut r) = residual(&theta) else {
        return (theta, f64::INFINITY);
    };
    let mut c = cost(&r);
    let mut lambda = 1e-3;
    for _ in 0..max_iter {
        let mut jac = Vec::with_capacity(p);
        for j in 0..p {
            let mut t = theta.clone();
            t[j] += steps[j];
            let Some(rj) = residual(&t) else {
                return (theta, c);
            };
            jac.push(rj.iter().zip(&r).map(|(a, b)| (a - b) / steps[j]).collect::<Vec<f64>>());
        }
        let mut jtj = vec![0.0; p * p];
        let mut jtr = vec![0.0; p];
        for a in 0..p {
            for b in a..p {
                let s: f64 = jac[a].iter().zip(&jac[b]).map(|(x, y)| x * y).sum();
                jtj[a * p + b] = s;
                jtj[b * p + a] = s;
            }
            jtr[a] = -jac[a].iter().zip(&r).map(|(x, y)| x * y).sum::<f64>();
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut m = jtj.clone();
            for d in 0..p {
                m[d * p + d] += lambda * jtj[d * p + d].max(1e-300);
            }
            let Some(delta) = solve(m, jtr.clone()) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(&delta).map(|(t, d)| t + d).collect();
            if let Some(rt) = residual(&trial) {
                let ct = cost(&rt);
                if ct < c {
                    let rel = (c - ct) / c.max(1e-300);
                    theta = trial;
                    r = rt;
                    c = ct;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = true;
                    if rel < 1e-14 {
                        return (theta, c);
                    }
                    break;
                }
            }
            lambda *= 8.0;
        }
        if !improved {
            break;
        }
    }
    (theta, c)
}

/// Ordinary least-squares line `y = a + b x`; returns `(a, b, r_squared)`.
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my) * (v - my)).sum();
    if sxx == 0.0 {
        return (my, 0.0, 0.0);
    }
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 0.0 } else { (sxy * sxy) / (sxx * syy) };
    (a, b, r2)
}
