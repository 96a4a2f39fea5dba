//! Flat Rayleigh channels for the K users and the leakage stacks derived from them.

use std::path::Path;

use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{hermitian_eig, CMatrix, LinalgError};
use crate::rng::{substream, CHANNEL_LANE_BASE};
use crate::scalar::RealScalar;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid system dimensions: {0}")]
    InvalidDims(String),
    #[error("user index {index} out of range for {users} users")]
    IndexOutOfRange { index: usize, users: usize },
    #[error("noise variance must be positive and finite, got {0}")]
    InvalidNoiseVariance(f64),
    #[error("channel of user {user} has shape {got:?}, expected {expected:?}")]
    Shape {
        user: usize,
        got: (usize, usize),
        expected: (usize, usize),
    },
    #[error("channel of user {user} is rank deficient")]
    RankDeficient { user: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("channel JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("channel file: {0}")]
    Io(#[from] std::io::Error),
}

/// Antenna, user and stream counts: N transmit antennas, M receive antennas per
/// user, K users, L streams per user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemDims {
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub users: usize,
    pub streams: usize,
}

impl SystemDims {
    pub fn new(tx_antennas: usize, rx_antennas: usize, users: usize, streams: usize) -> Result<Self, ChannelError> {
        let dims = Self {
            tx_antennas,
            rx_antennas,
            users,
            streams,
        };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.tx_antennas < 1 {
            return Err(ChannelError::InvalidDims("N ≥ 1 (transmit antennas)".into()));
        }
        if self.rx_antennas < 1 {
            return Err(ChannelError::InvalidDims("M ≥ 1 (receive antennas)".into()));
        }
        if self.users < 2 {
            return Err(ChannelError::InvalidDims("K ≥ 2 (users)".into()));
        }
        if self.streams < 1 || self.streams > self.rx_antennas {
            return Err(ChannelError::InvalidDims(format!(
                "1 ≤ L ≤ M (streams L = {}, receive antennas M = {})",
                self.streams, self.rx_antennas
            )));
        }
        Ok(())
    }
}

/// One realization of every user's channel plus the noise variance σ².
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T> {
    dims: SystemDims,
    channels: Vec<CMatrix<T>>,
    noise_variance: T,
}

impl<T: RealScalar> ChannelSet<T> {
    /// Validated constructor: shapes, σ² > 0 and full row rank of every `H_k`.
    pub fn new(dims: SystemDims, channels: Vec<CMatrix<T>>, noise_variance: T) -> Result<Self, ChannelError> {
        dims.validate()?;
        if channels.len() != dims.users {
            return Err(ChannelError::InvalidDims(format!(
                "{} channel matrices for {} users",
                channels.len(),
                dims.users
            )));
        }
        let expected = (dims.rx_antennas, dims.tx_antennas);
        for (user, h) in channels.iter().enumerate() {
            if h.shape() != expected {
                return Err(ChannelError::Shape {
                    user,
                    got: h.shape(),
                    expected,
                });
            }
            if !has_full_row_rank(h)? {
                return Err(ChannelError::RankDeficient { user });
            }
        }
        let set = Self::unchecked(dims, channels, noise_variance)?;
        Ok(set)
    }

    fn unchecked(dims: SystemDims, channels: Vec<CMatrix<T>>, noise_variance: T) -> Result<Self, ChannelError> {
        if !(noise_variance > T::zero()) || !noise_variance.is_finite() {
            return Err(ChannelError::InvalidNoiseVariance(noise_variance.to_f64_lossy()));
        }
        Ok(Self {
            dims,
            channels,
            noise_variance,
        })
    }

    pub fn dims(&self) -> SystemDims {
        self.dims
    }

    pub fn noise_variance(&self) -> T {
        self.noise_variance
    }

    pub fn channels(&self) -> &[CMatrix<T>] {
        &self.channels
    }

    /// `H_k` (zero-based user index).
    pub fn channel(&self, k: usize) -> Result<&CMatrix<T>, ChannelError> {
        self.channels.get(k).ok_or(ChannelError::IndexOutOfRange {
            index: k,
            users: self.dims.users,
        })
    }

    /// Same channels, different σ².
    pub fn with_noise_variance(&self, noise_variance: T) -> Result<Self, ChannelError> {
        Self::unchecked(self.dims, self.channels.clone(), noise_variance)
    }

    /// Scalar multiplying the identity in the leakage-plus-noise term: `M σ² / L`.
    pub fn noise_level(&self) -> T {
        T::from_count(self.dims.rx_antennas) * self.noise_variance / T::from_count(self.dims.streams)
    }

    pub fn to_json(&self) -> Result<String, ChannelError> {
        Ok(serde_json::to_string_pretty(&ChannelFile::from_set(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self, ChannelError> {
        serde_json::from_str::<ChannelFile>(text)?.into_set()
    }

    pub fn save_json(&self, path: &Path) -> Result<(), ChannelError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self, ChannelError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Smallest singular value above `max(1e-10, 8·sqrt(ε))` times the largest.
fn has_full_row_rank<T: RealScalar>(h: &CMatrix<T>) -> Result<bool, LinalgError> {
    let outer = h * &h.adjoint();
    let eig = hermitian_eig(&outer)?;
    let largest = eig.eigenvalues[0];
    let smallest = *eig.eigenvalues.last().expect("non-empty spectrum");
    let ratio = T::lit(1e-10).max(T::lit(8.0) * T::epsilon().sqrt());
    Ok(largest > T::zero() && smallest > ratio * ratio * largest)
}

/// One CN(0, 1) sample: independent N(0, 1/2) real and imaginary parts.
pub fn complex_gaussian<T: RealScalar, R: Rng + ?Sized>(rng: &mut R) -> Complex<T> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(
        T::lit(re * std::f64::consts::FRAC_1_SQRT_2),
        T::lit(im * std::f64::consts::FRAC_1_SQRT_2),
    )
}

fn draw_user_channel<T: RealScalar, R: Rng + ?Sized>(dims: SystemDims, rng: &mut R) -> CMatrix<T> {
    CMatrix::from_fn(dims.rx_antennas, dims.tx_antennas, |_, _| complex_gaussian(rng))
}

/// i.i.d. CN(0, 1) channels for all users, drawn in user order from one stream.
///
/// Full rank holds with probability one, so no rank check is made here.
pub fn draw_channel_set<T: RealScalar, R: Rng + ?Sized>(
    dims: SystemDims,
    noise_variance: T,
    rng: &mut R,
) -> Result<ChannelSet<T>, ChannelError> {
    dims.validate()?;
    let channels = (0..dims.users).map(|_| draw_user_channel(dims, rng)).collect();
    ChannelSet::unchecked(dims, channels, noise_variance)
}

/// Like [`draw_channel_set`], but user `k` draws from its own `(trial, k)` substream.
pub fn draw_channel_set_for_trial<T: RealScalar>(
    dims: SystemDims,
    noise_variance: T,
    master_seed: u64,
    trial: u64,
) -> Result<ChannelSet<T>, ChannelError> {
    dims.validate()?;
    let channels = (0..dims.users)
        .map(|k| {
            let mut rng = substream(master_seed, trial, CHANNEL_LANE_BASE + k as u64);
            draw_user_channel(dims, &mut rng)
        })
        .collect();
    ChannelSet::unchecked(dims, channels, noise_variance)
}

/// `H̄_k`: every other user's channel stacked vertically in ascending user order.
pub fn leakage_channel<T: RealScalar>(cs: &ChannelSet<T>, k: usize) -> Result<CMatrix<T>, ChannelError> {
    cs.channel(k)?;
    let others: Vec<&CMatrix<T>> = cs
        .channels
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != k)
        .map(|(_, h)| h)
        .collect();
    Ok(CMatrix::vstack(&others)?)
}

/// `(M σ² / L) · I_N`.
pub fn noise_term<T: RealScalar>(cs: &ChannelSet<T>) -> CMatrix<T> {
    let n = cs.dims.tx_antennas;
    CMatrix::identity(n).scale(cs.noise_level())
}

/// On-disk channel fixture: `channels[user][row][col] = [re, im]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelFile {
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub users: usize,
    pub streams: usize,
    pub noise_variance: f64,
    pub channels: Vec<Vec<Vec<[f64; 2]>>>,
}

impl ChannelFile {
    pub fn from_set<T: RealScalar>(cs: &ChannelSet<T>) -> Self {
        let d = cs.dims;
        Self {
            tx_antennas: d.tx_antennas,
            rx_antennas: d.rx_antennas,
            users: d.users,
            streams: d.streams,
            noise_variance: cs.noise_variance.to_f64_lossy(),
            channels: cs
                .channels
                .iter()
                .map(|h| {
                    (0..h.rows())
                        .map(|i| {
                            h.row(i)
                                .iter()
                                .map(|z| [z.re.to_f64_lossy(), z.im.to_f64_lossy()])
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        }
    }

    pub fn into_set<T: RealScalar>(self) -> Result<ChannelSet<T>, ChannelError> {
        let dims = SystemDims::new(self.tx_antennas, self.rx_antennas, self.users, self.streams)?;
        let mut channels = Vec::with_capacity(self.channels.len());
        for (user, rows) in self.channels.into_iter().enumerate() {
            let got = (rows.len(), rows.first().map_or(0, Vec::len));
            if rows.iter().any(|r| r.len() != got.1) {
                return Err(ChannelError::Shape {
                    user,
                    got,
                    expected: (dims.rx_antennas, dims.tx_antennas),
                });
            }
            let data = rows
                .into_iter()
                .flatten()
                .map(|[re, im]| Complex::new(T::lit(re), T::lit(im)))
                .collect();
            channels.push(CMatrix::new(got.0, got.1, data)?);
        }
        ChannelSet::new(dims, channels, T::lit(self.noise_variance))
    }
}
