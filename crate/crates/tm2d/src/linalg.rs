//! Small dense linear algebra for the metric suite: symmetric
//! eigendecomposition (cyclic Jacobi) and the matrix functions built on it.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Eigenvalues and eigenvectors of a symmetric matrix via cyclic Jacobi
/// rotations. Returns (eigenvalues, eigenvectors) with eigenvectors in
/// columns: a ≈ V · diag(λ) · Vᵀ.
pub fn sym_eig(a: &Tensor) -> Result<(Vec<f64>, Tensor)> {
    if a.rank() != 2 || a.rows() != a.cols() {
        return Err(Error::dimension(format!(
            "sym_eig expects a square matrix, got {:?}",
            a.shape()
        )));
    }
    let n = a.rows();
    let mut m = a.clone();
    // Symmetrize defensively; callers pass symmetric input up to roundoff.
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m.at2(i, j) + m.at2(j, i));
            m.set2(i, j, avg);
            m.set2(j, i, avg);
        }
    }
    let mut v = Tensor::zeros(&[n, n]);
    for i in 0..n {
        v.set2(i, i, 1.0);
    }

    let scale = (0..n)
        .map(|i| m.at2(i, i).abs())
        .fold(1e-300, f64::max)
        .max(off_diag_norm(&m));
    let tol = 1e-14 * scale;
    let max_sweeps = 100;
    for _ in 0..max_sweeps {
        if off_diag_norm(&m) <= tol {
            let eigenvalues = (0..n).map(|i| m.at2(i, i)).collect();
            return Ok((eigenvalues, v));
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m.at2(p, q);
                if apq.abs() <= tol * 1e-2 {
                    continue;
                }
                let app = m.at2(p, p);
                let aqq = m.at2(q, q);
                let theta = 0.5 * (aqq - app) / apq;
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, p, q, c, s);
                rotate_columns(&mut v, p, q, c, s);
            }
        }
    }
    if off_diag_norm(&m) <= tol * 10.0 {
        let eigenvalues = (0..n).map(|i| m.at2(i, i)).collect();
        return Ok((eigenvalues, v));
    }
    Err(Error::Numeric(format!(
        "jacobi eigendecomposition did not converge after {max_sweeps} sweeps"
    )))
}

fn off_diag_norm(m: &Tensor) -> f64 {
    let n = m.rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += m.at2(i, j) * m.at2(i, j);
        }
    }
    (2.0 * sum).sqrt()
}

/// Apply the Jacobi rotation J(p,q,θ)ᵀ · M · J(p,q,θ) in place.
fn rotate(m: &mut Tensor, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows();
    for k in 0..n {
        let mkp = m.at2(k, p);
        let mkq = m.at2(k, q);
        m.set2(k, p, c * mkp - s * mkq);
        m.set2(k, q, s * mkp + c * mkq);
    }
    for k in 0..n {
        let mpk = m.at2(p, k);
        let mqk = m.at2(q, k);
        m.set2(p, k, c * mpk - s * mqk);
        m.set2(q, k, s * mpk + c * mqk);
    }
}

fn rotate_columns(v: &mut Tensor, p: usize, q: usize, c: f64, s: f64) {
    let n = v.rows();
    for k in 0..n {
        let vkp = v.at2(k, p);
        let vkq = v.at2(k, q);
        v.set2(k, p, c * vkp - s * vkq);
        v.set2(k, q, s * vkp + c * vkq);
    }
}

/// Symmetric matrix square root. Eigenvalues in (−1e-8, 0) are clamped to 0;
/// anything more negative is a numerical error.
pub fn sym_sqrt(a: &Tensor) -> Result<Tensor> {
    let (mut vals, vecs) = sym_eig(a)?;
    for v in &mut vals {
        if *v < 0.0 {
            if *v > -1e-8 {
                *v = 0.0;
            } else {
                return Err(Error::Numeric(format!(
                    "matrix square root of a matrix with eigenvalue {v}"
                )));
            }
        }
        *v = v.sqrt();
    }
    // V · diag(sqrt λ) · Vᵀ
    let n = a.rows();
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            let mut sum = 0.0;
            for (k, sv) in vals.iter().enumerate() {
                sum += vecs.at2(i, k) * sv * vecs.at2(j, k);
            }
            out.set2(i, j, sum);
        }
    }
    Ok(out)
}

/// C = A · B for plain tensors.
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    crate::tensor::plain_mm(a, b)
}

/// Mean vector and covariance matrix (unbiased, n−1) of a set of rows.
pub fn mean_and_cov(rows: &[Vec<f64>]) -> Result<(Vec<f64>, Tensor)> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::TooShort(format!(
            "covariance needs at least 2 samples, got {n}"
        )));
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::dimension("ragged feature rows"));
    }
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, &x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut cov = Tensor::zeros(&[d, d]);
    for r in rows {
        let centered: Vec<f64> = r.iter().zip(&mean).map(|(&x, &m)| x - m).collect();
        for i in 0..d {
            if centered[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                let v = cov.at2(i, j) + centered[i] * centered[j];
                cov.set2(i, j, v);
            }
        }
    }
    let denom = (n - 1) as f64;
    for x in cov.data_mut() {
        *x /= denom;
    }
    Ok((mean, cov))
}
