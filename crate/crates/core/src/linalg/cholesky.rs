use num_complex::Complex;
use num_traits::Zero;

use super::{require_hermitian, require_square, CMatrix, LinalgError};
use crate::scalar::RealScalar;

/// Relative pivot floor: a pivot at or below `PIVOT_RTOL * trace(C) / n` is rejected.
pub const PIVOT_RTOL: f64 = 1e-12;

/// Lower Cholesky factor `L` with `L L^H = C` and a strictly positive real diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor<T> {
    pub lower: CMatrix<T>,
}

/// Cholesky factorization of a Hermitian positive definite matrix, no pivoting.
pub fn cholesky<T: RealScalar>(c: &CMatrix<T>) -> Result<CholeskyFactor<T>, LinalgError> {
    let n = require_square(c)?;
    require_hermitian(c)?;

    let mean_diag = c.trace().re / T::from_count(n);
    let floor = T::tol(PIVOT_RTOL, 4.0) * mean_diag.max(T::zero());
    let mut l = CMatrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = c[(j, j)].re;
        for k in 0..j {
            pivot -= l[(j, k)].norm_sqr();
        }
        if !(pivot > floor) {
            return Err(LinalgError::NotPositiveDefinite {
                index: j,
                pivot: pivot.to_f64_lossy(),
            });
        }
        let d = pivot.sqrt();
        l[(j, j)] = Complex::new(d, T::zero());
        for i in (j + 1)..n {
            let mut acc = c[(i, j)];
            for k in 0..j {
                acc -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = acc / d;
        }
    }
    Ok(CholeskyFactor { lower: l })
}

/// Inverse of a lower triangular matrix by forward substitution; the result is lower triangular.
pub fn invert_lower_triangular<T: RealScalar>(l: &CMatrix<T>) -> Result<CMatrix<T>, LinalgError> {
    let n = require_square(l)?;
    if !l.is_lower_triangular() {
        return Err(LinalgError::NotLowerTriangular);
    }
    let max_diag = (0..n).map(|i| l[(i, i)].norm()).fold(T::zero(), T::max);
    let floor = T::lit(1e-14) * max_diag;
    if let Some(index) = (0..n).find(|&i| !(l[(i, i)].norm() >= floor) || l[(i, i)].norm().is_zero()) {
        return Err(LinalgError::SingularTriangular { index });
    }

    let mut x = CMatrix::zeros(n, n);
    for j in 0..n {
        x[(j, j)] = l[(j, j)].inv();
        for i in (j + 1)..n {
            let mut acc: Complex<T> = Complex::zero();
            for k in j..i {
                acc += l[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = -acc / l[(i, i)];
        }
    }
    Ok(x)
}
