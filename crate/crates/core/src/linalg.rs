//! Dense row-major matrices, Cholesky solves and the partitioned Gram inverse.
//!
//! Every estimator in this crate is written in terms of blocks of `(W'W)^-1`,
//! so the factorization of choice is Cholesky on Gram matrices rather than QR
//! on the design itself.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};

/// Machine epsilon used by the pivot rule, `2^-52`.
const EPS: f64 = f64::EPSILON;

/// Immutable rectangular matrix of finite `f64` values, stored row-major.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {:?}", self.row(i))?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims(
                "DenseMatrix::new",
                format!("{} values for {}x{}", rows * cols, rows, cols),
                data.len(),
            ));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            let (row, col) = pos.checked_div(cols).map_or((0, 0), |r| (r, pos % cols));
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self { rows, cols, data })
    }

    /// Internal constructor for results of arithmetic on already-validated
    /// matrices.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * m);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != m {
                return Err(Error::dims(
                    "DenseMatrix::from_rows",
                    format!("{m} columns"),
                    format!("{} in row {i}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Self::new(n, m, data)
    }

    /// Column vector (`n x 1`).
    pub fn column_vector(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    /// Matrix whose columns are the given slices.
    pub fn from_columns<C: AsRef<[f64]>>(columns: &[C]) -> Result<Self> {
        let cols = columns.len();
        let rows = columns.first().map_or(0, |c| c.as_ref().len());
        let mut data = vec![0.0; rows * cols];
        for (j, c) in columns.iter().enumerate() {
            let c = c.as_ref();
            if c.len() != rows {
                return Err(Error::dims(
                    "DenseMatrix::from_columns",
                    format!("{rows} rows"),
                    format!("{} in column {j}", c.len()),
                ));
            }
            for (i, v) in c.iter().enumerate() {
                data[i * cols + j] = *v;
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_raw(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(value.is_finite());
        Self::from_raw(rows, cols, vec![value; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self::from_raw(self.cols, self.rows, out)
    }

    /// Copy of a contiguous range of rows.
    pub fn row_range(&self, range: Range<usize>) -> Self {
        assert!(range.end <= self.rows);
        let data = self.data[range.start * self.cols..range.end * self.cols].to_vec();
        Self::from_raw(range.len(), self.cols, data)
    }

    /// Copy of the sub-matrix `rows x cols`.
    pub fn block(&self, rows: Range<usize>, cols: Range<usize>) -> Self {
        assert!(rows.end <= self.rows && cols.end <= self.cols);
        let mut data = Vec::with_capacity(rows.len() * cols.len());
        for i in rows.clone() {
            data.extend_from_slice(&self.row(i)[cols.clone()]);
        }
        Self::from_raw(rows.len(), cols.len(), data)
    }

    /// Horizontal concatenation `[self : other]`.
    pub fn hstack(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::dims("hstack", self.rows, other.rows));
        }
        let cols = self.cols + other.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(other.row(i));
        }
        Ok(Self::from_raw(self.rows, cols, data))
    }

    /// Vertical concatenation.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::dims("vstack", self.cols, other.cols));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self::from_raw(self.rows + other.rows, self.cols, data))
    }

    /// Multiplies row `i` by `weights[i]`.
    pub fn scale_rows(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.rows {
            return Err(Error::dims("scale_rows", self.rows, weights.len()));
        }
        let mut data = self.data.clone();
        for (i, w) in weights.iter().enumerate() {
            for v in &mut data[i * self.cols..(i + 1) * self.cols] {
                *v *= w;
            }
        }
        Ok(Self::from_raw(self.rows, self.cols, data))
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::from_raw(self.rows, self.cols, self.data.iter().map(|v| v * factor).collect())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, context: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::dims(context, format!("{:?}", self.shape()), format!("{:?}", other.shape())));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect();
        Ok(Self::from_raw(self.rows, self.cols, data))
    }

    /// `(A + A') / 2`.
    pub fn symmetrize(&self) -> Self {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut data = self.data.clone();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self::from_raw(n, n, data)
    }

    /// Largest absolute entry (0 for an empty matrix).
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.shape() != other.shape() {
            return Err(Error::dims("max_abs_diff", format!("{:?}", self.shape()), format!("{:?}", other.shape())));
        }
        Ok(self.data.iter().zip(&other.data).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.data[i * n + j] - self.data[j * n + i]).abs());
            }
        }
        worst
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::dims("matmul", format!("{} rows on the right", self.cols), other.rows));
        }
        Ok(gemm(View::normal(self), View::normal(other)))
    }

    /// `self' * other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(Error::dims("t_matmul", format!("{} rows on the right", self.rows), other.rows));
        }
        Ok(gemm(View::transposed(self), View::normal(other)))
    }

    /// `self * other'`.
    pub fn matmul_t(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(Error::dims("matmul_t", format!("{} columns on the right", self.cols), other.cols));
        }
        Ok(gemm(View::normal(self), View::transposed(other)))
    }

    /// `self' * self`.
    pub fn gram(&self) -> Self {
        gemm(View::transposed(self), View::normal(self)).symmetrize()
    }
}

/// Strided, possibly transposed view used to drive `dgemm`.
struct View<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
    row_stride: isize,
    col_stride: isize,
}

impl<'a> View<'a> {
    fn normal(m: &'a DenseMatrix) -> Self {
        Self { data: &m.data, rows: m.rows, cols: m.cols, row_stride: m.cols as isize, col_stride: 1 }
    }

    fn transposed(m: &'a DenseMatrix) -> Self {
        Self { data: &m.data, rows: m.cols, cols: m.rows, row_stride: 1, col_stride: m.cols as isize }
    }
}

fn gemm(a: View<'_>, b: View<'_>) -> DenseMatrix {
    debug_assert_eq!(a.cols, b.rows);
    let (m, k, n) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; m * n];
    if m == 0 || n == 0 || k == 0 {
        return DenseMatrix::from_raw(m, n, out);
    }
    // SAFETY: the views describe in-bounds strided access to their backing
    // slices, `out` holds exactly m*n row-major elements, and the output does
    // not alias either input.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            a.row_stride,
            a.col_stride,
            b.data.as_ptr(),
            b.row_stride,
            b.col_stride,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
    DenseMatrix::from_raw(m, n, out)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in 4 * chunks..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Lower-triangular Cholesky factor `A = L L'` of a symmetric positive
/// definite matrix.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Factors `a`. A pivot at or below `n * eps * max(diag(a))` is treated
    /// as a rank deficiency.
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        let max_diag = a.diagonal().into_iter().fold(0.0_f64, f64::max);
        Self::factor_with_scale(a, max_diag)
    }

    /// Like [`Cholesky::factor`] but with the pivot threshold measured
    /// against `scale` instead of `a`'s own diagonal. Schur complements use
    /// the diagonal of the Gram matrix they were reduced from, otherwise a
    /// complement that cancels to rounding noise would look well scaled.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn factor_with_scale(a: &DenseMatrix, scale_diag: f64) -> Result<Self> {
        let n = a.rows;
        if n == 0 || a.cols != n {
            return Err(Error::dims("cholesky", "non-empty square matrix", format!("{}x{}", a.rows, a.cols)));
        }
        let max_diag = scale_diag;
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        let asym = a.asymmetry();
        if asym > 1e-10 * scale {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let threshold = n as f64 * EPS * max_diag;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let head = &l[j * n..j * n + j];
            let pivot = a.data[j * n + j] - dot(head, head);
            // also rejects NaN pivots
            if !(pivot > threshold) {
                return Err(Error::NotPositiveDefinite { pivot: j, value: pivot, threshold });
            }
            let d = pivot.sqrt();
            l[j * n + j] = d;
            for i in (j + 1)..n {
                let (upper, lower) = l.split_at_mut(i * n);
                let row_j = &upper[j * n..j * n + j];
                let s = a.data[i * n + j] - dot(&lower[..j], row_j);
                lower[j] = s / d;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// The factor `L` as a matrix.
    pub fn lower(&self) -> DenseMatrix {
        DenseMatrix::from_raw(self.n, self.n, self.l.clone())
    }

    /// Solves `A X = B`.
    pub fn solve(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.n;
        if b.rows != n {
            return Err(Error::dims("cholesky solve", format!("{n} rows"), b.rows));
        }
        let m = b.cols;
        let mut x = b.data.clone();
        // forward: L Y = B
        for i in 0..n {
            let (prev, cur) = x.split_at_mut(i * m);
            let row = &mut cur[..m];
            for j in 0..i {
                let lij = self.l[i * n + j];
                if lij != 0.0 {
                    let yj = &prev[j * m..(j + 1) * m];
                    for (r, y) in row.iter_mut().zip(yj) {
                        *r -= lij * y;
                    }
                }
            }
            let inv = 1.0 / self.l[i * n + i];
            for r in row.iter_mut() {
                *r *= inv;
            }
        }
        // backward: L' X = Y
        for i in (0..n).rev() {
            let (head, tail) = x.split_at_mut((i + 1) * m);
            let row = &mut head[i * m..];
            for j in (i + 1)..n {
                let lji = self.l[j * n + i];
                if lji != 0.0 {
                    let xj = &tail[(j - i - 1) * m..(j - i) * m];
                    for (r, v) in row.iter_mut().zip(xj) {
                        *r -= lji * v;
                    }
                }
            }
            let inv = 1.0 / self.l[i * n + i];
            for r in row.iter_mut() {
                *r *= inv;
            }
        }
        Ok(DenseMatrix::from_raw(n, m, x))
    }

    /// `A^-1`, symmetrized.
    pub fn inverse(&self) -> DenseMatrix {
        self.solve(&DenseMatrix::identity(self.n)).expect("identity has matching rows").symmetrize()
    }

    /// Cheap condition-number estimate of `A`: `(max L_ii / min L_ii)^2`.
    /// This is a lower bound on the 2-norm condition number.
    pub fn condition_estimate(&self) -> f64 {
        let diag: Vec<f64> = (0..self.n).map(|i| self.l[i * self.n + i]).collect();
        let max = diag.iter().cloned().fold(0.0_f64, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        (max / min).powi(2)
    }
}

/// Solves `A X = B` for symmetric positive definite `A`.
pub fn cholesky_solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    Cholesky::factor(a)?.solve(b)
}

/// Blocks of `(W'W)^-1` for `W = [W2 : W1]` (controls first, focus second).
///
/// * `w11 = (W2*' W2*)^-1` with `W2* = (I - P_W1) W2` (k2 x k2)
/// * `w12 = -(W2'W2)^-1 W2'W1 w22` (k2 x k1)
/// * `w22 = (W1*' W1*)^-1` with `W1* = (I - P_W2) W1` (k1 x k1)
#[derive(Debug, Clone, PartialEq)]
pub struct GramInverseBlocks {
    pub w11: DenseMatrix,
    pub w12: DenseMatrix,
    pub w22: DenseMatrix,
}

impl GramInverseBlocks {
    /// Computes the blocks from the control block `w2` and focus block `w1`
    /// using only k1 x k1 and k2 x k2 factorizations.
    pub fn from_blocks(w2: &DenseMatrix, w1: &DenseMatrix) -> Result<Self> {
        if w1.rows != w2.rows {
            return Err(Error::dims("partitioned_gram_inverse", w2.rows, w1.rows));
        }
        let g22 = w2.gram(); // W2'W2
        let g11 = w1.gram(); // W1'W1
        let cross = w2.t_matmul(w1)?; // W2'W1, k2 x k1
        let chol_controls = Cholesky::factor(&g22)?;
        let chol_focus = Cholesky::factor(&g11)?;

        // (W2'W2)^-1 W2'W1
        let proj_controls = chol_controls.solve(&cross)?;
        // W1*'W1* = W1'W1 - W1'W2 (W2'W2)^-1 W2'W1
        let schur_focus = g11.sub(&cross.t_matmul(&proj_controls)?)?.symmetrize();
        let k = (w1.cols + w2.cols) as f64;
        let focus_scale = k * g11.diagonal().into_iter().fold(0.0_f64, f64::max) / w1.cols as f64;
        let w22 = Cholesky::factor_with_scale(&schur_focus, focus_scale)?.inverse();

        // W2*'W2* = W2'W2 - W2'W1 (W1'W1)^-1 W1'W2
        let proj_focus = chol_focus.solve(&cross.transpose())?;
        let schur_controls = g22.sub(&cross.matmul(&proj_focus)?)?.symmetrize();
        let controls_scale = k * g22.diagonal().into_iter().fold(0.0_f64, f64::max) / w2.cols as f64;
        let w11 = Cholesky::factor_with_scale(&schur_controls, controls_scale)?.inverse();

        let w12 = proj_controls.matmul(&w22)?.scale(-1.0);
        Ok(Self { w11, w12, w22 })
    }

    pub fn k2(&self) -> usize {
        self.w11.rows
    }

    pub fn k1(&self) -> usize {
        self.w22.rows
    }

    /// The full `(k2 + k1) x (k2 + k1)` inverse `[[w11, w12], [w12', w22]]`.
    pub fn assemble(&self) -> DenseMatrix {
        let (k2, k1) = (self.k2(), self.k1());
        let k = k1 + k2;
        let mut out = DenseMatrix::zeros(k, k);
        for i in 0..k2 {
            for j in 0..k2 {
                out.data[i * k + j] = self.w11.get(i, j);
            }
            for j in 0..k1 {
                out.data[i * k + k2 + j] = self.w12.get(i, j);
                out.data[(k2 + j) * k + i] = self.w12.get(i, j);
            }
        }
        for i in 0..k1 {
            for j in 0..k1 {
                out.data[(k2 + i) * k + k2 + j] = self.w22.get(i, j);
            }
        }
        out
    }
}

/// Partitioned inverse of the Gram matrix of a design's `[W2 : W1]`.
pub fn partitioned_gram_inverse(design: &crate::regression::PartitionedDesign) -> Result<GramInverseBlocks> {
    GramInverseBlocks::from_blocks(design.controls(), design.focus())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> DenseMatrix {
        DenseMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn construction_rejects_bad_input() {
        assert!(matches!(DenseMatrix::new(2, 2, vec![1.0; 3]), Err(Error::DimensionMismatch { .. })));
        assert_eq!(DenseMatrix::new(2, 2, vec![1.0, 2.0, f64::NAN, 1.0]), Err(Error::NonFinite { row: 1, col: 0 }));
        assert!(DenseMatrix::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn products_agree_with_naive_loops() {
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let b = m(&[&[1.0, 0.5], &[-1.0, 2.0], &[0.0, 3.0]]);
        assert_eq!(a.matmul(&b).unwrap(), m(&[&[-1.0, 13.5], &[-1.0, 30.0]]));
        assert_eq!(a.t_matmul(&a).unwrap(), a.transpose().matmul(&a).unwrap());
        assert_eq!(b.matmul_t(&b).unwrap(), b.matmul(&b.transpose()).unwrap());
        assert!(a.matmul(&a).is_err());
    }

    #[test]
    fn cholesky_identity_returns_rhs() {
        let rhs = m(&[&[1.0, -2.0], &[3.5, 0.0], &[7.0, 1e-3]]);
        assert_eq!(cholesky_solve(&DenseMatrix::identity(3), &rhs).unwrap(), rhs);
    }

    #[test]
    fn cholesky_two_by_two() {
        // [[4,2],[2,3]] [0.5, 0]' = [2, 1]'
        let x = cholesky_solve(&m(&[&[4.0, 2.0], &[2.0, 3.0]]), &m(&[&[2.0], &[1.0]])).unwrap();
        assert!((x.get(0, 0) - 0.5).abs() < 1e-15);
        assert!(x.get(1, 0).abs() < 1e-15);
    }

    #[test]
    fn cholesky_rejects_singular_and_asymmetric() {
        let err = cholesky_solve(&m(&[&[1.0, 2.0], &[2.0, 4.0]]), &m(&[&[1.0], &[1.0]])).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { pivot: 1, .. }));
        let err = Cholesky::factor(&m(&[&[1.0, 2.0], &[0.0, 4.0]])).unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { .. }));
        assert!(matches!(
            cholesky_solve(&DenseMatrix::identity(2), &DenseMatrix::zeros(3, 1)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn inverse_is_symmetric_and_inputs_untouched() {
        let a = m(&[&[5.0, 1.0, 0.5], &[1.0, 4.0, 0.2], &[0.5, 0.2, 3.0]]);
        let before = a.clone();
        let inv = cholesky_solve(&a, &DenseMatrix::identity(3)).unwrap();
        assert!(inv.max_abs_diff(&inv.transpose()).unwrap() < 1e-10);
        assert_eq!(a, before);
        let back = a.matmul(&inv).unwrap();
        assert!(back.max_abs_diff(&DenseMatrix::identity(3)).unwrap() < 1e-14);
    }

    #[test]
    fn orthogonal_blocks_have_zero_cross_term() {
        // columns of a 4x4 Hadamard matrix are mutually orthogonal
        let w2 = m(&[&[1.0, 1.0], &[1.0, -1.0], &[1.0, 1.0], &[1.0, -1.0]]);
        let w1 = m(&[&[1.0, 1.0], &[1.0, 1.0], &[-1.0, -1.0], &[-1.0, -1.0]]).block(0..4, 0..1);
        let w1 = w1.hstack(&m(&[&[1.0], &[-1.0], &[-1.0], &[1.0]])).unwrap();
        let blocks = GramInverseBlocks::from_blocks(&w2, &w1).unwrap();
        assert!(blocks.w12.max_abs() < 1e-15);
        let direct11 = Cholesky::factor(&w2.gram()).unwrap().inverse();
        let direct22 = Cholesky::factor(&w1.gram()).unwrap().inverse();
        assert!(blocks.w11.max_abs_diff(&direct11).unwrap() < 1e-15);
        assert!(blocks.w22.max_abs_diff(&direct22).unwrap() < 1e-15);
    }

    #[test]
    fn intercept_and_trend_blocks_match_closed_form() {
        // W'W = [[6, 21], [21, 91]], det = 105; inverse = [[91, -21], [-21, 6]] / 105
        let w2 = DenseMatrix::filled(6, 1, 1.0);
        let w1 = DenseMatrix::column_vector(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let b = GramInverseBlocks::from_blocks(&w2, &w1).unwrap();
        assert!((b.w11.get(0, 0) - 91.0 / 105.0).abs() < 1e-14);
        assert!((b.w12.get(0, 0) + 21.0 / 105.0).abs() < 1e-14);
        assert!((b.w22.get(0, 0) - 6.0 / 105.0).abs() < 1e-14);
    }

    #[test]
    fn collinear_blocks_are_rejected() {
        let w2 = DenseMatrix::column_vector(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let w1 = w2.scale(2.0);
        assert!(matches!(GramInverseBlocks::from_blocks(&w2, &w1), Err(Error::NotPositiveDefinite { .. })));
    }
}
