use num_complex::Complex;
use num_traits::Zero;

use super::{require_hermitian, CMatrix, LinalgError};
use crate::scalar::RealScalar;

/// Sweep budget for cyclic Jacobi.
pub const MAX_JACOBI_SWEEPS: usize = 30;

/// Converged once the off-diagonal Frobenius mass is at most this fraction of `‖A‖_F`.
const OFF_DIAGONAL_RTOL: f64 = 1e-12;

/// Relative size below which negative eigenvalues of a PSD matrix are rounding noise.
pub const PSD_CLAMP_RTOL: f64 = 1e-10;

/// Eigendecomposition `A = U diag(λ) U^H` with `λ` non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianEig<T> {
    pub eigenvalues: Vec<T>,
    /// Unitary; column `i` pairs with `eigenvalues[i]`.
    pub eigenvectors: CMatrix<T>,
}

/// Hermitian eigendecomposition by cyclic complex Jacobi rotations.
///
/// Eigenpairs come out sorted by descending eigenvalue (stable for ties) and each
/// eigenvector is rotated so its largest-magnitude entry is real and positive, so
/// identical inputs always give identical outputs.
pub fn hermitian_eig<T: RealScalar>(a: &CMatrix<T>) -> Result<HermitianEig<T>, LinalgError> {
    require_hermitian(a)?;
    let n = a.rows();
    let mut work = a.hermitian_part();
    let mut vectors = CMatrix::identity(n);

    let threshold = T::tol(OFF_DIAGONAL_RTOL, 16.0) * work.frobenius_norm();
    let mut converged = false;
    for _ in 0..=MAX_JACOBI_SWEEPS {
        if work.off_diagonal_norm() <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut work, &mut vectors, p, q);
            }
        }
    }
    if !converged {
        return Err(LinalgError::NoConvergence {
            sweeps: MAX_JACOBI_SWEEPS,
            residual: work.off_diagonal_norm().to_f64_lossy(),
        });
    }

    let diag = work.real_diagonal();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).expect("finite eigenvalues"));

    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let mut eigenvectors = CMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    fix_phases(&mut eigenvectors);
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Annihilate `work[p][q]` with a unitary plane rotation, accumulating it into `vectors`.
///
/// `work` is kept exactly Hermitian: only column entries are computed and the
/// mirrored row entries are their conjugates.
fn rotate<T: RealScalar>(work: &mut CMatrix<T>, vectors: &mut CMatrix<T>, p: usize, q: usize) {
    let apq = work[(p, q)];
    let magnitude = apq.norm_sqr().sqrt();
    if magnitude.is_zero() {
        return;
    }
    let app = work[(p, p)].re;
    let aqq = work[(q, q)].re;
    // |a_pq| negligible next to both diagonal entries: rotation would be the identity
    let hundred = T::lit(100.0);
    if hundred * magnitude + app.abs() == app.abs() && hundred * magnitude + aqq.abs() == aqq.abs() {
        work[(p, q)] = Complex::zero();
        work[(q, p)] = Complex::zero();
        return;
    }

    // V = diag(1, phase) · [[c, s], [-s, c]] with phase = e^{-iφ} making the pivot real
    let phase = apq.conj() / magnitude;
    let theta = (aqq - app) / (T::lit(2.0) * magnitude);
    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
    let c = T::one() / (t * t + T::one()).sqrt();
    let s = t * c;

    let n = work.rows();
    let a = work.as_mut_slice();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let x = a[k * n + p];
        let y = a[k * n + q] * phase;
        let new_p = x * c - y * s;
        let new_q = x * s + y * c;
        a[k * n + p] = new_p;
        a[k * n + q] = new_q;
        a[p * n + k] = new_p.conj();
        a[q * n + k] = new_q.conj();
    }
    a[p * n + p] = Complex::new(app - t * magnitude, T::zero());
    a[q * n + q] = Complex::new(aqq + t * magnitude, T::zero());
    a[p * n + q] = Complex::zero();
    a[q * n + p] = Complex::zero();

    let cols = vectors.cols();
    for row in vectors.as_mut_slice().chunks_exact_mut(cols) {
        let x = row[p];
        let y = row[q] * phase;
        row[p] = x * c - y * s;
        row[q] = x * s + y * c;
    }
}

/// Scale each column so its first largest-magnitude entry is real positive.
fn fix_phases<T: RealScalar>(vectors: &mut CMatrix<T>) {
    for j in 0..vectors.cols() {
        let mut best = 0;
        let mut best_mag = T::zero();
        for i in 0..vectors.rows() {
            let m = vectors[(i, j)].norm_sqr().sqrt();
            if m > best_mag {
                best = i;
                best_mag = m;
            }
        }
        if best_mag.is_zero() {
            continue;
        }
        let rotation = vectors[(best, j)].conj() / best_mag;
        for i in 0..vectors.rows() {
            vectors[(i, j)] *= rotation;
        }
        vectors[(best, j)] = Complex::new(best_mag, T::zero());
    }
}

/// Clamp rounding-level negative eigenvalues of a PSD matrix to zero.
///
/// Anything negative beyond `PSD_CLAMP_RTOL · λ_max` is an error.
pub fn clamp_psd_spectrum<T: RealScalar>(eigenvalues: &mut [T]) -> Result<(), LinalgError> {
    let top = eigenvalues.iter().copied().fold(T::zero(), T::max);
    let allowance = T::tol(PSD_CLAMP_RTOL, 1024.0) * top;
    for v in eigenvalues.iter_mut() {
        if *v < T::zero() {
            if -*v <= allowance {
                *v = T::zero();
            } else {
                return Err(LinalgError::NotPositiveSemidefinite {
                    eigenvalue: v.to_f64_lossy(),
                });
            }
        }
    }
    Ok(())
}

impl<T: RealScalar> HermitianEig<T> {
    /// `U diag(λ) U^H`.
    pub fn reconstruct(&self) -> CMatrix<T> {
        let u = &self.eigenvectors;
        let scaled = CMatrix::from_fn(u.rows(), u.cols(), |i, j| u[(i, j)] * self.eigenvalues[j]);
        &scaled * &u.adjoint()
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type M = CMatrix<f64>;

    #[test]
    fn diagonal_input_is_returned_sorted() {
        let e = hermitian_eig(&M::from_real_rows(&[&[3.0, 0.0], &[0.0, 1.0]])).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 1.0]);
        assert_eq!(e.eigenvectors, M::identity(2));

        let e = hermitian_eig(&M::from_real_rows(&[&[1.0, 0.0], &[0.0, 3.0]])).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 1.0]);
        assert_eq!(e.eigenvectors, M::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]));
    }

    #[test]
    fn identity_spectrum_and_stable_ties() {
        let e = hermitian_eig(&M::identity(5)).unwrap();
        assert_eq!(e.eigenvalues, vec![1.0; 5]);
        assert_eq!(e.eigenvectors, M::identity(5));
    }

    #[test]
    fn two_by_two_complex_closed_form() {
        // characteristic polynomial (2 - x)^2 - 1: roots 3 and 1
        let a = M::new(
            2,
            2,
            vec![
                Complex::new(2.0, 0.0),
                Complex::new(0.0, 1.0),
                Complex::new(0.0, -1.0),
                Complex::new(2.0, 0.0),
            ],
        )
        .unwrap();
        let e = hermitian_eig(&a).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
        assert!((&e.reconstruct() - &a).frobenius_norm() < 1e-13);
        let u = &e.eigenvectors;
        assert!((&u.adjoint_mul(u) - &M::identity(2)).frobenius_norm() < 1e-14);
    }

    #[test]
    fn phase_convention_makes_largest_entry_real_positive() {
        let a = M::from_fn(4, 4, |i, j| {
            let z = Complex::new((i + j) as f64 * 0.3, i as f64 - j as f64);
            if i == j {
                Complex::new(z.re + 2.0, 0.0)
            } else {
                z
            }
        });
        let e = hermitian_eig(&a).unwrap();
        for j in 0..4 {
            let col = e.eigenvectors.column(j);
            let (imax, zmax) =
                col.iter().enumerate().fold(
                    (0, 0.0),
                    |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc },
                );
            assert_eq!(col[imax].im, 0.0);
            assert!(col[imax].re > 0.0 && (col[imax].re - zmax).abs() < 1e-15);
        }
        assert_eq!(hermitian_eig(&a).unwrap(), e);
    }

    #[test]
    fn rejects_non_hermitian() {
        let a = M::from_real_rows(&[&[1.0, 2.0], &[0.0, 1.0]]);
        assert!(matches!(hermitian_eig(&a), Err(LinalgError::NotHermitian { .. })));
    }

    #[test]
    fn zero_matrix_has_zero_spectrum() {
        let e = hermitian_eig(&M::zeros(3, 3)).unwrap();
        assert_eq!(e.eigenvalues, vec![0.0; 3]);
    }

    #[test]
    fn psd_clamp_policy() {
        let mut ok = vec![2.0, 1.0, -1e-12];
        clamp_psd_spectrum(&mut ok).unwrap();
        assert_eq!(ok, vec![2.0, 1.0, 0.0]);
        let mut bad = vec![2.0, -1e-6];
        assert!(matches!(
            clamp_psd_spectrum(&mut bad),
            Err(LinalgError::NotPositiveSemidefinite { .. })
        ));
    }
}
