//! Small dense factorizations: Jacobi eigenvalues and singular values,
//! Cholesky. Dimensions here are latent sizes (a few to a few hundred),
//! so cubic cost is fine.

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(a: &Matrix) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let mut m: Vec<f64> = a.as_slice().to_vec();
    // Work on the symmetrised copy; callers pass numerically symmetric input.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = v;
            m[j * n + i] = v;
        }
    }
    let scale: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt();
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[i * n + j] * m[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Singular values of an `n x d` matrix, descending, by one-sided (Hestenes)
/// Jacobi orthogonalisation of its columns.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let (n, d) = a.shape();
    let mut cols: Vec<Vec<f64>> = (0..d)
        .map(|j| (0..n).map(|i| a.get(i, j)).collect())
        .collect();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in (p + 1)..d {
                let alpha = dot(&cols[p], &cols[p]);
                let beta = dot(&cols[q], &cols[q]);
                let gamma = dot(&cols[p], &cols[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let (cp, cq) = (&mut left[p], &mut right[0]);
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Lower-triangular `L` with `L Lᵀ = a` for symmetric positive definite `a`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    let n = a.rows();
    if a.cols() != n {
        return Err(Error::Shape("cholesky needs a square matrix".into()));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = a.get(j, j);
        for k in 0..j {
            diag -= l.get(j, k) * l.get(j, k);
        }
        if !(diag > 0.0) {
            return Err(Error::Domain(format!(
                "matrix is not positive definite (pivot {j} = {diag})"
            )));
        }
        let ljj = diag.sqrt();
        l.set(j, j, ljj);
        for i in (j + 1)..n {
            let mut v = a.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, v / ljj);
        }
    }
    Ok(l)
}

/// `log |a|` from its Cholesky factor.
pub fn log_det_cholesky(l: &Matrix) -> f64 {
    2.0 * (0..l.rows()).map(|i| l.get(i, i).ln()).sum::<f64>()
}

/// Solve `L Lᵀ x = b` for each column of `b`.
pub fn cholesky_solve(l: &Matrix, b: &Matrix) -> Result<Matrix> {
    let n = l.rows();
    if b.rows() != n {
        return Err(Error::Shape("right-hand side has wrong row count".into()));
    }
    let mut x = b.clone();
    for c in 0..b.cols() {
        for i in 0..n {
            let mut v = x.get(i, c);
            for k in 0..i {
                v -= l.get(i, k) * x.get(k, c);
            }
            x.set(i, c, v / l.get(i, i));
        }
        for i in (0..n).rev() {
            let mut v = x.get(i, c);
            for k in (i + 1)..n {
                v -= l.get(k, i) * x.get(k, c);
            }
            x.set(i, c, v / l.get(i, i));
        }
    }
    Ok(x)
}

/// Solve a general square system `a x = b` by partial-pivot Gaussian elimination.
pub fn solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if a.cols() != n || b.len() != n {
        return Err(Error::Shape("solve needs a square system".into()));
    }
    let mut m = a.as_slice().to_vec();
    let mut x = b.to_vec();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))
            .unwrap_or(col);
        if m[pivot * n + col] == 0.0 {
            return Err(Error::Domain("singular system".into()));
        }
        if pivot != col {
            for k in 0..n {
                m.swap(col * n + k, pivot * n + k);
            }
            x.swap(col, pivot);
        }
        for r in (col + 1)..n {
            let f = m[r * n + col] / m[col * n + col];
            for k in col..n {
                m[r * n + k] -= f * m[col * n + k];
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut v = x[r];
        for k in (r + 1)..n {
            v -= m[r * n + k] * x[k];
        }
        x[r] = v / m[r * n + r];
    }
    Ok(x)
}
