//! Dense symmetric matrices and the factorizations the estimators need.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{check_len, FwdaError, Result};

/// A real symmetric `p x p` matrix.
///
/// Symmetry is exact: construction replaces the input with the average of
/// itself and its transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(DMatrix<f64>);

impl SymmetricMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() == 0 {
            return Err(FwdaError::ShapeError {
                what: "matrix dimension",
                expected: 1,
                found: 0,
            });
        }
        check_len("matrix columns", m.nrows(), m.ncols())?;
        Ok(Self(symmetrize(m)))
    }

    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        check_len("matrix entry count", dim * dim, entries.len())?;
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self(DMatrix::identity(dim, dim))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "dimension must be positive");
        Self(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.0[(j, k)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.0[(j, j)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// Entries in row-major order.
    pub fn to_row_major(&self) -> Vec<f64> {
        let p = self.dim();
        let mut out = Vec::with_capacity(p * p);
        for j in 0..p {
            for k in 0..p {
                out.push(self.0[(j, k)]);
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Self {
        Self(&self.0 * c)
    }

    /// Eigenvalues (unsorted) and the matching orthonormal eigenvectors.
    pub fn eigen(&self) -> (DVector<f64>, DMatrix<f64>) {
        let eig = SymmetricEigen::new(self.0.clone());
        (eig.eigenvalues, eig.eigenvectors)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().0.min()
    }

    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        CholeskyFactor::new(self)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    /// Rebuilds `V diag(values) V^T`.
    pub fn from_eigen(values: &DVector<f64>, vectors: &DMatrix<f64>) -> Self {
        let mut scaled = vectors.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= values[k];
        }
        Self(symmetrize(scaled * vectors.transpose()))
    }
}

pub(crate) fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let p = m.nrows();
    for j in 0..p {
        for k in (j + 1)..p {
            let avg = 0.5 * (m[(j, k)] + m[(k, j)]);
            m[(j, k)] = avg;
            m[(k, j)] = avg;
        }
    }
    m
}

/// Lower-triangular `L` with `A = L L^T` and a strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    lower: DMatrix<f64>,
}

impl CholeskyFactor {
    pub fn new(a: &SymmetricMatrix) -> Result<Self> {
        let p = a.dim();
        let m = a.as_matrix();
        let mut l = DMatrix::<f64>::zeros(p, p);
        for j in 0..p {
            let mut d = m[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !(d > 0.0) || !d.is_finite() {
                return Err(FwdaError::NotPositiveDefinite(
                    "Cholesky factorization hit a non-positive pivot",
                ));
            }
            let djj = libm::sqrt(d);
            l[(j, j)] = djj;
            for i in (j + 1)..p {
                let mut s = m[(i, j)];
                for k in 0..j {
                    s -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(Self { lower: l })
    }

    /// Wraps a factor that is already lower triangular with positive diagonal.
    pub(crate) fn from_lower_unchecked(lower: DMatrix<f64>) -> Self {
        Self { lower }
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.nrows()
    }

    /// `log |A| = 2 sum log L_jj`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim())
            .map(|j| libm::log(self.lower[(j, j)]))
            .sum::<f64>()
    }

    /// `||L^T y||^2 = y^T A y`.
    pub fn quadratic_form(&self, y: &[f64]) -> f64 {
        let p = self.dim();
        let mut acc = 0.0;
        for k in 0..p {
            let mut z = 0.0;
            for j in k..p {
                z += self.lower[(j, k)] * y[j];
            }
            acc += z * z;
        }
        acc
    }

    /// Solves `L z = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let p = self.dim();
        for j in 0..p {
            let mut s = b[j];
            for k in 0..j {
                s -= self.lower[(j, k)] * b[k];
            }
            b[j] = s / self.lower[(j, j)];
        }
    }

    /// `A^{-1}` via two triangular solves per column.
    pub fn inverse(&self) -> SymmetricMatrix {
        let p = self.dim();
        let mut inv = DMatrix::<f64>::zeros(p, p);
        let mut col = alloc::vec![0.0; p];
        for c in 0..p {
            col.iter_mut().for_each(|v| *v = 0.0);
            col[c] = 1.0;
            self.solve_lower_in_place(&mut col);
            // back substitution with L^T
            for j in (0..p).rev() {
                let mut s = col[j];
                for k in (j + 1)..p {
                    s -= self.lower[(k, j)] * col[k];
                }
                col[j] = s / self.lower[(j, j)];
            }
            for j in 0..p {
                inv[(j, c)] = col[j];
            }
        }
        SymmetricMatrix(symmetrize(inv))
    }

    /// `L L^T` reassembled.
    pub fn reconstruct(&self) -> SymmetricMatrix {
        SymmetricMatrix(symmetrize(&self.lower * self.lower.transpose()))
    }
}

/// Matrix-vector product in a fixed summation order.
pub(crate) fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let (r, c) = m.shape();
    let mut out = alloc::vec![0.0; r];
    for (j, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for k in 0..c {
            s += m[(j, k)] * v[k];
        }
        *o = s;
    }
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_symmetrizes() {
        let m = SymmetricMatrix::from_row_slice(2, &[1.0, 2.0, 4.0, 3.0]).unwrap();
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.get(1, 0), 3.0);
    }

    #[test]
    fn rejects_non_square_and_empty() {
        assert!(SymmetricMatrix::new(DMatrix::zeros(2, 3)).is_err());
        assert!(SymmetricMatrix::new(DMatrix::zeros(0, 0)).is_err());
    }

    #[test]
    fn cholesky_round_trip_and_log_det() {
        let a = SymmetricMatrix::from_row_slice(3, &[4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0])
            .unwrap();
        let c = a.cholesky().unwrap();
        let back = c.reconstruct();
        for j in 0..3 {
            for k in 0..3 {
                assert!((back.get(j, k) - a.get(j, k)).abs() < 1e-12);
            }
        }
        let det = a.as_matrix().determinant();
        assert!((c.log_det() - det.ln()).abs() < 1e-12);
        let inv = c.inverse();
        let prod = a.as_matrix() * inv.as_matrix();
        assert!((prod - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-12);
        let y = [0.3, -1.0, 2.0];
        let direct =
            DVector::from_column_slice(&y).dot(&(a.as_matrix() * DVector::from_column_slice(&y)));
        assert!((c.quadratic_form(&y) - direct).abs() < 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = SymmetricMatrix::from_diagonal(&[1.0, -1.0]);
        assert!(matches!(
            a.cholesky(),
            Err(FwdaError::NotPositiveDefinite(_))
        ));
    }
}
