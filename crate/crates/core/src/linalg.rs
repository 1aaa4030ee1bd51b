//! Small dense linear algebra for design systems (a few dozen unknowns at most).

use crate::error::{Error, Result};

/// Largest accepted 1-norm condition estimate.
pub const MAX_CONDITION: f64 = 1e12;
/// Largest accepted residual of the solved system.
pub const MAX_RESIDUAL: f64 = 1e-9;

fn norm1(a: &[Vec<f64>]) -> f64 {
    let n = a.first().map_or(0, |r| r.len());
    (0..n)
        .map(|j| a.iter().map(|r| r[j].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) struct Lu {
    lu: Vec<Vec<f64>>,
    perm: Vec<usize>,
}

pub(crate) fn factor(a: &[Vec<f64>]) -> Option<Lu> {
    let n = a.len();
    let mut lu = a.to_vec();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| lu[i][k].abs().total_cmp(&lu[j][k].abs()))?;
        if lu[p][k] == 0.0 || !lu[p][k].is_finite() {
            return None;
        }
        lu.swap(k, p);
        perm.swap(k, p);
        for i in k + 1..n {
            let m = lu[i][k] / lu[k][k];
            lu[i][k] = m;
            for j in k + 1..n {
                lu[i][j] -= m * lu[k][j];
            }
        }
    }
    Some(Lu { lu, perm })
}

impl Lu {
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i][j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                x[i] -= self.lu[i][j] * x[j];
            }
            x[i] /= self.lu[i][i];
        }
        x
    }
}

impl Lu {
    /// Solves `a^T x = b`.
    pub(crate) fn solve_t(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut z = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                z[i] -= self.lu[j][i] * z[j];
            }
            z[i] /= self.lu[i][i];
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                z[i] -= self.lu[j][i] * z[j];
            }
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }
}

/// Dot product accumulated in twice the working precision.
pub(crate) fn dot2(a: &[f64], b: &[f64]) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for (&x, &y) in a.iter().zip(b) {
        let p = x * y;
        let pe = x.mul_add(y, -p);
        let t = s + p;
        let z = t - s;
        let se = (s - (t - z)) + (p - z);
        s = t;
        c += se + pe;
    }
    s + c
}

/// Solves the square system `a x = b` by row-pivoted elimination.
///
/// Rejects the system when the 1-norm condition number exceeds
/// [`MAX_CONDITION`] or the back-substituted residual exceeds
/// [`MAX_RESIDUAL`].
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    if n == 0 || b.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::DesignRejected("system is not square".into()));
    }
    let lu = factor(a).ok_or_else(|| {
        Error::DesignRejected("singular design matrix; choose a different grid".into())
    })?;
    let cond = condition_from(&lu, a);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::DesignRejected(format!(
            "design matrix condition estimate {cond:.3e} exceeds {MAX_CONDITION:.0e}; choose a different grid"
        )));
    }
    let x = lu.solve(b);
    check_residual(a, &x, b)?;
    Ok(x)
}

fn condition_from(lu: &Lu, a: &[Vec<f64>]) -> f64 {
    let n = a.len();
    let mut inv_cols = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        inv_cols.push(lu.solve(&e));
    }
    let inv_norm = inv_cols
        .iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    norm1(a) * inv_norm
}

/// 1-norm condition number of a square matrix (infinite when singular).
pub fn condition_estimate(a: &[Vec<f64>]) -> f64 {
    match factor(a) {
        Some(lu) => condition_from(&lu, a),
        None => f64::INFINITY,
    }
}

fn check_residual(a: &[Vec<f64>], x: &[f64], b: &[f64]) -> Result<()> {
    let res = max_residual(a, x, b);
    if !(res < MAX_RESIDUAL) {
        return Err(Error::DesignRejected(format!(
            "back-substitution residual {res:.3e} too large"
        )));
    }
    Ok(())
}

/// Max-norm of `a x - b` for a (possibly rectangular) matrix.
pub fn max_residual(a: &[Vec<f64>], x: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(row, bi)| (row.iter().zip(x).map(|(r, v)| r * v).sum::<f64>() - bi).abs())
        .fold(0.0, f64::max)
}

/// Minimum-norm solution of the under-determined system `r x = e`, where `r`
/// has fewer rows than columns and full row rank.
///
/// Uses a Householder QR factorisation of `r^T`, which avoids squaring the
/// condition number as the normal equations would.
pub fn min_norm_solve(r: &[Vec<f64>], e: &[f64]) -> Result<Vec<f64>> {
    let k = r.len();
    let n = r.first().map_or(0, |row| row.len());
    if k == 0 || e.len() != k || r.iter().any(|row| row.len() != n) || n < k {
        return Err(Error::DesignRejected(
            "under-determined system has inconsistent shape".into(),
        ));
    }
    // Columns of r^T are the rows of r; work on them in place.
    let mut cols: Vec<Vec<f64>> = r.to_vec();
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(k);
    for j in 0..k {
        let norm = cols[j][j..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::DesignRejected(
                "response matrix is rank deficient".into(),
            ));
        }
        let alpha = if cols[j][j] > 0.0 { -norm } else { norm };
        let mut v = vec![0.0; n];
        v[j] = cols[j][j] - alpha;
        v[(j + 1)..n].copy_from_slice(&cols[j][(j + 1)..n]);
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        for c in cols.iter_mut().skip(j) {
            let dot: f64 = v.iter().zip(c.iter()).map(|(a, b)| a * b).sum();
            let f = 2.0 * dot / vnorm2;
            for (ci, vi) in c.iter_mut().zip(&v) {
                *ci -= f * vi;
            }
        }
        vs.push(v);
    }
    // Upper-triangular factor t (k x k): t[i][j] = cols[j][i].
    let diag_max = (0..k).map(|i| cols[i][i].abs()).fold(0.0, f64::max);
    let diag_min = (0..k)
        .map(|i| cols[i][i].abs())
        .fold(f64::INFINITY, f64::min);
    if !(diag_min > diag_max / MAX_CONDITION) {
        return Err(Error::DesignRejected(
            "response matrix is rank deficient or ill-conditioned".into(),
        ));
    }
    // Solve t^T z = e (forward substitution).
    let mut z = vec![0.0; n];
    for i in 0..k {
        let mut s = e[i];
        for j in 0..i {
            s -= cols[i][j] * z[j];
        }
        z[i] = s / cols[i][i];
    }
    // x = Q z, Q = H_0 H_1 ... H_{k-1}.
    for v in vs.iter().rev() {
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        let dot: f64 = v.iter().zip(&z).map(|(a, b)| a * b).sum();
        let f = 2.0 * dot / vnorm2;
        for (zi, vi) in z.iter_mut().zip(v) {
            *zi -= f * vi;
        }
    }
    check_residual(r, &z, e)?;
    Ok(z)
}
