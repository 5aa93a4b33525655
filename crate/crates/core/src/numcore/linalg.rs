//! Small dense symmetric eigen-solvers.
//!
//! Matrices here are at most a few hundred per side, so plain cyclic Jacobi
//! and implicit tridiagonal QL are enough.

use alloc::vec;
use alloc::vec::Vec;

use super::Matrix;
use crate::{Error, Result};

/// Cap on cyclic Jacobi sweeps; a sweep visits every off-diagonal pair once.
/// Quadratic convergence means well-conditioned inputs settle in < 15.
pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Cap on implicit QL iterations spent on any single eigenvalue.
pub const QL_MAX_ITERATIONS: usize = 60;

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
pub fn symmetric_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::Dimension("eigenvalues need a square matrix"));
    }
    let mut a: Vec<f64> = m.as_slice().to_vec();
    let scale = m.max_abs();
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut converged = n < 2;
    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum();
        let diag: f64 = (0..n).map(|i| a[i * n + i] * a[i * n + i]).sum();
        if off <= (f64::EPSILON * f64::EPSILON) * diag.max(scale * scale) {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    if !converged {
        return Err(Error::IterationLimit { limit: JACOBI_MAX_SWEEPS });
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// Smallest singular value, from the smallest eigenvalue of the Gram matrix
/// of the smaller dimension.
pub fn smallest_singular_value(m: &Matrix) -> Result<f64> {
    if m.rows() == 0 || m.cols() == 0 {
        return Ok(0.0);
    }
    let gram = if m.rows() >= m.cols() { m.matmul_tn(m)? } else { m.matmul_nt(m)? };
    let eig = symmetric_eigenvalues(&gram)?;
    Ok(libm::sqrt(eig[0].max(0.0)))
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    let n = m.rows();
    if m.cols() != n {
        return Err(Error::Dimension("cholesky needs a square matrix"));
    }
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = m.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) {
            return Err(Error::CholeskyFailure);
        }
        let djj = libm::sqrt(d);
        l.set(j, j, djj);
        for i in j + 1..n {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / djj);
        }
    }
    Ok(l)
}

/// Implicit QL on a symmetric tridiagonal matrix.
///
/// `diag` holds the diagonal and becomes the eigenvalues; `off[i]` couples
/// rows `i` and `i + 1` (the last slot is scratch). Returns the first
/// component of each normalized eigenvector, which is all Golub-Welsch needs.
pub(crate) fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    debug_assert_eq!(off.len(), n);
    let mut z = vec![0.0; n];
    if n == 0 {
        return Ok(z);
    }
    z[0] = 1.0;
    off[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > QL_MAX_ITERATIONS {
                return Err(Error::IterationLimit { limit: QL_MAX_ITERATIONS });
            }
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = libm::hypot(g, 1.0);
            g = diag[m] - diag[l] + off[l] / (g + libm::copysign(r, g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * off[i];
                let b = c * off[i];
                r = libm::hypot(f, g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(z)
}
