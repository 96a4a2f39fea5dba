//! SLNR precoders.
//!
//! Both schemes work on the same Hermitian pair per user `k`:
//!
//! ```text
//! A = H_k^H H_k                          (signal, PSD of rank M)
//! B = (M σ² / L) I + H̄_k^H H̄_k           (leakage plus noise, PD)
//! ```
//!
//! The original scheme takes the leading generalized eigenvectors of `(A, B)`,
//! normalized so that `T^H B T = I`. The balanced scheme instead normalizes
//! against `C = A + B`, which yields `P^H A P = diag(θ)` and `P^H B P = diag(1 − θ)`.
//! Both select the leading `L` columns and rescale to `Tr(F F^H) = L`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{leakage_channel, ChannelError, ChannelSet};
use crate::linalg::{
    cholesky, clamp_psd_spectrum, hermitian_eig, invert_lower_triangular, require_hermitian, CMatrix, LinalgError,
};
use crate::scalar::RealScalar;

#[derive(Debug, Error)]
pub enum PrecoderError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("SLNR denominator is not positive ({0:e})")]
    DegenerateDenominator(f64),
    #[error("precoder has shape {got:?}, expected {expected_rows} rows")]
    Shape { got: (usize, usize), expected_rows: usize },
}

/// Which precoder design to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Leading generalized eigenvectors (maximum SLNR).
    Original,
    /// Balanced simultaneous diagonalization against `A + B`.
    Proposed,
}

impl Scheme {
    pub const ALL: [Scheme; 2] = [Scheme::Original, Scheme::Proposed];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Original => "original",
            Scheme::Proposed => "proposed",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "original" | "o" | "ged" => Ok(Scheme::Original),
            "proposed" | "p" | "balanced" => Ok(Scheme::Proposed),
            other => Err(format!("unknown scheme '{other}' (expected original or proposed)")),
        }
    }
}

/// `T^H A T = diag(λ)`, `T^H B T = I`, with `λ` non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct GedDiagonalization<T> {
    pub transform: CMatrix<T>,
    pub lambda: Vec<T>,
}

/// `P^H A P = diag(θ)`, `P^H B P = diag(ω)`, `θ + ω = 1`, θ non-increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDiagonalization<T> {
    pub transform: CMatrix<T>,
    pub theta: Vec<T>,
    pub omega: Vec<T>,
}

/// Per-user precoding matrix `F` (N×L), normalized to `Tr(F F^H) = L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder<T> {
    pub scheme: Scheme,
    pub user: usize,
    pub matrix: CMatrix<T>,
    /// ρ for the original scheme, γ for the proposed one.
    pub scale: T,
    /// λ₁..λ_L (original) or θ₁..θ_L (proposed).
    pub stream_gains: Vec<T>,
}

impl<T: RealScalar> Precoder<T> {
    pub fn streams(&self) -> usize {
        self.matrix.cols()
    }
}

/// The Hermitian pair `(A, B)` for user `k`.
pub fn build_pair<T: RealScalar>(cs: &ChannelSet<T>, k: usize) -> Result<(CMatrix<T>, CMatrix<T>), PrecoderError> {
    let signal = cs.channel(k)?.gram();
    let leakage = leakage_channel(cs, k)?.gram();
    let mut noisy = leakage;
    let level = cs.noise_level();
    for i in 0..noisy.rows() {
        noisy[(i, i)].re += level;
    }
    Ok((signal, noisy))
}

fn check_pair<T: RealScalar>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<(), LinalgError> {
    require_hermitian(a)?;
    require_hermitian(b)?;
    if a.shape() != b.shape() {
        return Err(LinalgError::DimensionMismatch {
            left: a.shape(),
            right: b.shape(),
        });
    }
    Ok(())
}

/// Generalized eigendecomposition of `(A, B)` via Cholesky reduction of `B`.
///
/// With `B = L L^H` and `L^{-1} A L^{-H} = V diag(λ) V^H`, the transform is
/// `T = L^{-H} V`.
pub fn ged_diagonalize<T: RealScalar>(a: &CMatrix<T>, b: &CMatrix<T>) -> Result<GedDiagonalization<T>, LinalgError> {
    check_pair(a, b)?;
    let factor = cholesky(b)?;
    let w = invert_lower_triangular(&factor.lower)?;
    let reduced = (&(&w * a) * &w.adjoint()).hermitian_part();
    let eig = hermitian_eig(&reduced)?;
    let mut lambda = eig.eigenvalues;
    clamp_psd_spectrum(&mut lambda)?;
    let transform = w.adjoint_mul(&eig.eigenvectors);
    Ok(GedDiagonalization { transform, lambda })
}

/// Balanced simultaneous diagonalization of `(A, B)`.
///
/// 1. `C = A + B = L L^H` (Cholesky), `Q = (L^{-1})^H` so that `Q^H C Q = I`.
/// 2. `A' = Q^H A Q = U diag(θ) U^H`.
/// 3. `P = Q U`, `ω = 1 − θ`.
pub fn simultaneous_diagonalize<T: RealScalar>(
    a: &CMatrix<T>,
    b: &CMatrix<T>,
) -> Result<PairDiagonalization<T>, LinalgError> {
    check_pair(a, b)?;
    let c = a + b;
    let factor = cholesky(&c)?;
    let l_inv = invert_lower_triangular(&factor.lower)?;
    let q = l_inv.adjoint();
    let a_prime = (&(&l_inv * a) * &q).hermitian_part();
    let eig = hermitian_eig(&a_prime)?;
    let mut theta = eig.eigenvalues;
    clamp_psd_spectrum(&mut theta)?;
    let omega = theta.iter().map(|&t| T::one() - t).collect();
    let transform = &q * &eig.eigenvectors;
    Ok(PairDiagonalization {
        transform,
        theta,
        omega,
    })
}

/// Leading `streams` columns of `basis`, rescaled so the result has `Tr(F F^H) = streams`.
fn normalized_leading_columns<T: RealScalar>(basis: &CMatrix<T>, streams: usize) -> (CMatrix<T>, T) {
    let raw = basis.leading_columns(streams);
    let energy = raw.frobenius_norm().powi(2);
    let scale = (T::from_count(streams) / energy).sqrt();
    (raw.scale(scale), scale)
}

/// Maximum-SLNR precoder `F = ρ T[:, ..L]`.
pub fn original_precoder<T: RealScalar>(cs: &ChannelSet<T>, k: usize) -> Result<Precoder<T>, PrecoderError> {
    let (a, b) = build_pair(cs, k)?;
    let ged = ged_diagonalize(&a, &b)?;
    let streams = cs.dims().streams;
    let (matrix, scale) = normalized_leading_columns(&ged.transform, streams);
    Ok(Precoder {
        scheme: Scheme::Original,
        user: k,
        matrix,
        scale,
        stream_gains: ged.lambda[..streams].to_vec(),
    })
}

/// Balanced precoder `F' = γ P[:, ..L]`.
pub fn proposed_precoder<T: RealScalar>(cs: &ChannelSet<T>, k: usize) -> Result<Precoder<T>, PrecoderError> {
    let (a, b) = build_pair(cs, k)?;
    let pair = simultaneous_diagonalize(&a, &b)?;
    let streams = cs.dims().streams;
    let (matrix, scale) = normalized_leading_columns(&pair.transform, streams);
    Ok(Precoder {
        scheme: Scheme::Proposed,
        user: k,
        matrix,
        scale,
        stream_gains: pair.theta[..streams].to_vec(),
    })
}

pub fn precoder<T: RealScalar>(cs: &ChannelSet<T>, k: usize, scheme: Scheme) -> Result<Precoder<T>, PrecoderError> {
    match scheme {
        Scheme::Original => original_precoder(cs, k),
        Scheme::Proposed => proposed_precoder(cs, k),
    }
}

/// Precoders for every user, in user order.
pub fn all_precoders<T: RealScalar>(cs: &ChannelSet<T>, scheme: Scheme) -> Result<Vec<Precoder<T>>, PrecoderError> {
    (0..cs.dims().users).map(|k| precoder(cs, k, scheme)).collect()
}

/// `Tr(F^H A F) / Tr(F^H B F)` for user `k`.
pub fn slnr_value<T: RealScalar>(cs: &ChannelSet<T>, k: usize, f: &CMatrix<T>) -> Result<T, PrecoderError> {
    let (a, b) = build_pair(cs, k)?;
    if f.rows() != a.rows() {
        return Err(PrecoderError::Shape {
            got: f.shape(),
            expected_rows: a.rows(),
        });
    }
    let num = f.adjoint_mul(&(&a * f)).trace().re;
    let den = f.adjoint_mul(&(&b * f)).trace().re;
    if !(den > T::zero()) {
        return Err(PrecoderError::DegenerateDenominator(den.to_f64_lossy()));
    }
    Ok(num / den)
}
