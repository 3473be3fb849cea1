//! Oracles that deliberately avoid the factorizations used by the fitting
//! code: Cramer's rule with cofactor-expansion determinants, and explicit
//! N x N projectors.

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, DenseMatrix};

/// Largest system the factorial-cost determinant expansion accepts.
pub const CRAMER_MAX_K: usize = 8;

/// Largest N for which dense projectors are built.
pub const DENSE_PROJECTOR_MAX_N: usize = 200;

/// Determinant by cofactor expansion along the first row.
pub fn cofactor_determinant(a: &[Vec<f64>]) -> f64 {
    match a.len() {
        0 => 1.0,
        1 => a[0][0],
        2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
        n => {
            let mut det = 0.0;
            for j in 0..n {
                if a[0][j] == 0.0 {
                    continue;
                }
                let minor: Vec<Vec<f64>> = a[1..]
                    .iter()
                    .map(|row| row.iter().enumerate().filter(|(c, _)| *c != j).map(|(_, v)| *v).collect())
                    .collect();
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                det += sign * a[0][j] * cofactor_determinant(&minor);
            }
            det
        }
    }
}

/// Least-squares coefficients by Cramer's rule on the normal equations:
/// `b_j = det(A_j) / det(A)` with `A = X'X` and `A_j` equal to `A` with
/// column `j` replaced by `X'y`.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn cramer_oracle_fit(x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    let (n, k) = x.shape();
    if k > CRAMER_MAX_K {
        return Err(Error::OracleSizeExceeded { k });
    }
    if y.shape() != (n, 1) || k == 0 {
        return Err(Error::dims(
            "cramer_oracle_fit",
            format!("{n}x1 outcome and k >= 1"),
            format!("{}x{}, k = {k}", y.rows(), y.cols()),
        ));
    }
    let mut a = vec![vec![0.0; k]; k];
    let mut rhs = vec![0.0; k];
    for i in 0..n {
        let row = x.row(i);
        for p in 0..k {
            rhs[p] += row[p] * y.get(i, 0);
            for q in 0..k {
                a[p][q] += row[p] * row[q];
            }
        }
    }
    let det = cofactor_determinant(&a);
    // Hadamard's bound for a positive semidefinite matrix
    let scale: f64 = (0..k).map(|p| a[p][p]).product();
    if !(det.abs() > 1e-12 * scale) {
        return Err(Error::SingularSystem { det });
    }
    let coef = (0..k)
        .map(|j| {
            let mut aj = a.clone();
            for p in 0..k {
                aj[p][j] = rhs[p];
            }
            cofactor_determinant(&aj) / det
        })
        .collect::<Vec<_>>();
    DenseMatrix::column_vector(&coef)
}

/// Explicit hat matrix `Z (Z'Z)^-1 Z'`.
pub fn dense_projector(z: &DenseMatrix) -> Result<DenseMatrix> {
    if z.rows() > DENSE_PROJECTOR_MAX_N {
        return Err(Error::InstanceTooLarge { n: z.rows(), max: DENSE_PROJECTOR_MAX_N });
    }
    let inv = Cholesky::factor(&z.gram())?.inverse();
    z.matmul(&inv)?.matmul_t(z)
}

/// `I - P_Z` applied to `targets` through the explicit projector.
pub fn dense_annihilate(targets: &DenseMatrix, z: &DenseMatrix) -> Result<DenseMatrix> {
    targets.sub(&dense_projector(z)?.matmul(targets)?)
}
