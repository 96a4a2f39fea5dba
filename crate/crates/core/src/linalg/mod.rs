//! Small dense complex linear algebra: just what the precoders need.

mod cholesky;
mod eig;
mod matrix;

pub use cholesky::{cholesky, invert_lower_triangular, CholeskyFactor};
pub use eig::{clamp_psd_spectrum, hermitian_eig, HermitianEig, MAX_JACOBI_SWEEPS};
pub use matrix::CMatrix;

use thiserror::Error;

use crate::scalar::RealScalar;

/// Relative Hermitian tolerance used for preconditions (before precision flooring).
pub const HERMITIAN_RTOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("invalid shape {rows}x{cols} for {len} entries")]
    InvalidShape { rows: usize, cols: usize, len: usize },
    #[error("matrix contains NaN or infinite entries")]
    NonFinite,
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("matrix is not Hermitian (relative asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },
    #[error("matrix is not positive definite: pivot {index} = {pivot:e}")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("matrix is not lower triangular")]
    NotLowerTriangular,
    #[error("triangular matrix is singular at diagonal index {index}")]
    SingularTriangular { index: usize },
    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },
    #[error("matrix expected positive semidefinite has eigenvalue {eigenvalue:e}")]
    NotPositiveSemidefinite { eigenvalue: f64 },
}

/// True iff `‖A − A^H‖_F ≤ rtol · ‖A‖_F`. The zero matrix is Hermitian.
pub fn is_hermitian<T: RealScalar>(a: &CMatrix<T>, rtol: T) -> bool {
    a.is_square() && hermitian_defect(a) <= rtol * a.frobenius_norm()
}

/// `‖A − A^H‖_F` for square `A`.
pub(crate) fn hermitian_defect<T: RealScalar>(a: &CMatrix<T>) -> T {
    let n = a.rows();
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] - a[(j, i)].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

pub(crate) fn require_square<T: RealScalar>(a: &CMatrix<T>) -> Result<usize, LinalgError> {
    if a.is_square() {
        Ok(a.rows())
    } else {
        Err(LinalgError::NotSquare {
            rows: a.rows(),
            cols: a.cols(),
        })
    }
}

pub(crate) fn require_hermitian<T: RealScalar>(a: &CMatrix<T>) -> Result<(), LinalgError> {
    require_square(a)?;
    let rtol = T::tol(HERMITIAN_RTOL, 64.0);
    if is_hermitian(a, rtol) {
        Ok(())
    } else {
        let norm = a.frobenius_norm();
        Err(LinalgError::NotHermitian {
            asymmetry: (hermitian_defect(a) / norm).to_f64_lossy(),
        })
    }
}
