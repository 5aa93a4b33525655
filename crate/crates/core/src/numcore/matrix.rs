use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::{Error, Result};

/// Dense row-major matrix of `f64`.
///
/// Constructors reject non-finite entries. Arithmetic does not re-check
/// finiteness on every call; the model and training code check their states
/// at layer/iteration boundaries and raise [`Error::NonFiniteState`].
///
/// Products accumulate along the inner dimension in index order, so a
/// column of `A * X` is bit-identical to `A * x` for that column.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DataLength { expected: rows * cols, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState { iteration: None });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Matrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from row slices; all rows must have equal length.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("rows of unequal length"));
        }
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Matrix::new(rows.len(), cols, data)
    }

    /// Stacks equal-length vectors as the columns of a matrix.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::Dimension("columns of unequal length"));
        }
        let cols = columns.len();
        let m = Matrix::from_fn(rows, cols, |i, j| columns[j][i]);
        Matrix::new(rows, cols, m.data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        frobenius_norm(self)
    }

    /// `||self - other||_F`.
    pub fn frobenius_distance(&self, other: &Matrix) -> Result<f64> {
        self.check_same_shape(other)?;
        let sq: Vec<f64> = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        Ok(libm::sqrt(pairwise_sum(&sq)))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    fn check_same_shape(&self, other: &Matrix) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension("matrix shapes differ"));
        }
        Ok(())
    }

    /// `self * rhs`.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension("matmul inner dimensions differ"));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        self.matmul_into(rhs, &mut out);
        Ok(out)
    }

    /// `self^T * rhs`.
    pub fn matmul_tn(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(Error::Dimension("matmul_tn row counts differ"));
        }
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        self.matmul_tn_into(rhs, &mut out);
        Ok(out)
    }

    /// `self * rhs^T`, each entry a pairwise-summed dot product of rows.
    pub fn matmul_nt(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.cols {
            return Err(Error::Dimension("matmul_nt column counts differ"));
        }
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        self.matmul_nt_into(rhs, &mut out);
        Ok(out)
    }

    /// `self * x`, summing along each row in index order.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.cols != x.len() {
            return Err(Error::Dimension("matvec length differs from column count"));
        }
        Ok((0..self.rows)
            .map(|i| {
                let mut acc = 0.0;
                for (a, b) in self.row(i).iter().zip(x) {
                    acc += a * b;
                }
                acc
            })
            .collect())
    }

    /// `self^T * x`, accumulating rows in index order.
    pub fn matvec_t(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.rows != x.len() {
            return Err(Error::Dimension("matvec_t length differs from row count"));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a * xi;
            }
        }
        Ok(out)
    }

    // The three kernels below keep a block of output entries in registers and
    // accumulate each entry in the same order as the matching scalar routine
    // (`matvec`, `matvec_t`, `pairwise_dot`), so results agree bitwise.

    pub(crate) fn matmul_into(&self, rhs: &Matrix, out: &mut Matrix) {
        debug_assert_eq!(self.cols, rhs.rows);
        debug_assert_eq!(out.shape(), (self.rows, rhs.cols));
        let n = rhs.cols;
        let inner = self.cols;
        let b = &rhs.data;
        for i in 0..self.rows {
            let a_row = &self.data[i * inner..(i + 1) * inner];
            let out_row = &mut out.data[i * n..(i + 1) * n];
            let mut j = 0;
            while j + LANES <= n {
                let mut acc = [0.0f64; LANES];
                for (k, &a) in a_row.iter().enumerate() {
                    let b_row = &b[k * n + j..k * n + j + LANES];
                    for t in 0..LANES {
                        acc[t] += a * b_row[t];
                    }
                }
                out_row[j..j + LANES].copy_from_slice(&acc);
                j += LANES;
            }
            for (jj, o) in out_row.iter_mut().enumerate().skip(j) {
                let mut acc = 0.0;
                for (k, &a) in a_row.iter().enumerate() {
                    acc += a * b[k * n + jj];
                }
                *o = acc;
            }
        }
    }

    pub(crate) fn matmul_tn_into(&self, rhs: &Matrix, out: &mut Matrix) {
        debug_assert_eq!(self.rows, rhs.rows);
        debug_assert_eq!(out.shape(), (self.cols, rhs.cols));
        let n = rhs.cols;
        let b = &rhs.data;
        for j in 0..self.cols {
            let out_row = &mut out.data[j * n..(j + 1) * n];
            let mut c = 0;
            while c + LANES <= n {
                let mut acc = [0.0f64; LANES];
                for i in 0..self.rows {
                    let a = self.data[i * self.cols + j];
                    let b_row = &b[i * n + c..i * n + c + LANES];
                    for t in 0..LANES {
                        acc[t] += a * b_row[t];
                    }
                }
                out_row[c..c + LANES].copy_from_slice(&acc);
                c += LANES;
            }
            for (cc, o) in out_row.iter_mut().enumerate().skip(c) {
                let mut acc = 0.0;
                for i in 0..self.rows {
                    acc += self.data[i * self.cols + j] * b[i * n + cc];
                }
                *o = acc;
            }
        }
    }

    pub(crate) fn matmul_nt_into(&self, rhs: &Matrix, out: &mut Matrix) {
        debug_assert_eq!(self.cols, rhs.cols);
        debug_assert_eq!(out.shape(), (self.rows, rhs.rows));
        let m = rhs.rows;
        for i in 0..self.rows {
            let a = self.row(i);
            let mut j = 0;
            while j + 4 <= m {
                let dots = pairwise_dot4(a, [rhs.row(j), rhs.row(j + 1), rhs.row(j + 2), rhs.row(j + 3)]);
                out.data[i * m + j..i * m + j + 4].copy_from_slice(&dots);
                j += 4;
            }
            for jj in j..m {
                out.data[i * m + jj] = pairwise_dot(a, rhs.row(jj));
            }
        }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.axpy(1.0, other);
        Ok(out)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.axpy(-1.0, other);
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> Matrix {
        let mut out = self.clone();
        out.scale(factor);
        out
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    /// `self += alpha * other`; panics on shape mismatch.
    pub fn axpy(&mut self, alpha: f64, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// Output entries accumulated together in the product kernels.
const LANES: usize = 8;

/// Pairwise (cascade) summation with a fixed recursion shape, so the result
/// depends only on the input order.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        let mut acc = [0.0f64; 4];
        let chunks = values.chunks_exact(4);
        let rem = chunks.remainder();
        for c in chunks {
            acc[0] += c[0];
            acc[1] += c[1];
            acc[2] += c[2];
            acc[3] += c[3];
        }
        let mut tail = 0.0;
        for v in rem {
            tail += v;
        }
        return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Dot product with the same fixed cascade shape as [`pairwise_sum`].
pub fn pairwise_dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    const BLOCK: usize = 32;
    if a.len() <= BLOCK {
        let mut acc = [0.0f64; 4];
        let ca = a.chunks_exact(4);
        let cb = b.chunks_exact(4);
        let (ra, rb) = (ca.remainder(), cb.remainder());
        for (x, y) in ca.zip(cb) {
            acc[0] += x[0] * y[0];
            acc[1] += x[1] * y[1];
            acc[2] += x[2] * y[2];
            acc[3] += x[3] * y[3];
        }
        let mut tail = 0.0;
        for (x, y) in ra.iter().zip(rb) {
            tail += x * y;
        }
        return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + tail;
    }
    let mid = a.len() / 2;
    pairwise_dot(&a[..mid], &b[..mid]) + pairwise_dot(&a[mid..], &b[mid..])
}

/// Four [`pairwise_dot`]s sharing the left operand, lane by lane identical.
fn pairwise_dot4(a: &[f64], b: [&[f64]; 4]) -> [f64; 4] {
    const BLOCK: usize = 32;
    let len = a.len();
    if len <= BLOCK {
        let mut acc = [[0.0f64; 4]; 4];
        let full = len / 4 * 4;
        let mut k = 0;
        while k < full {
            for lane in 0..4 {
                let y = &b[lane][k..k + 4];
                for t in 0..4 {
                    acc[lane][t] += a[k + t] * y[t];
                }
            }
            k += 4;
        }
        let mut out = [0.0; 4];
        for lane in 0..4 {
            let mut tail = 0.0;
            for kk in full..len {
                tail += a[kk] * b[lane][kk];
            }
            let c = acc[lane];
            out[lane] = ((c[0] + c[1]) + (c[2] + c[3])) + tail;
        }
        return out;
    }
    let mid = len / 2;
    let lo = pairwise_dot4(&a[..mid], b.map(|r| &r[..mid]));
    let hi = pairwise_dot4(&a[mid..], b.map(|r| &r[mid..]));
    [lo[0] + hi[0], lo[1] + hi[1], lo[2] + hi[2], lo[3] + hi[3]]
}

/// Square root of the sum of squared entries.
pub fn frobenius_norm(m: &Matrix) -> f64 {
    libm::sqrt(pairwise_dot(m.as_slice(), m.as_slice()))
}
