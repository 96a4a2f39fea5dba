//! SLNR precoding for downlink multi-user MIMO.
//!
//! Two per-user precoders are built from the Hermitian pair
//! `A = H_k^H H_k`, `B = (M σ² / L) I + H̄_k^H H̄_k`:
//!
//! * the maximum-SLNR precoder from the generalized eigenvectors of `(A, B)`;
//! * the balanced precoder from the simultaneous diagonalization
//!   `P^H A P = diag(θ)`, `P^H B P = diag(1 − θ)`.
//!
//! The numeric core is generic over [`scalar::RealScalar`] (`f32` or `f64`); the
//! aliases below fix the precision for the common cases. The Monte-Carlo driver
//! and the experiment front end run in `f64`.

pub mod channel;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod precoder;
pub mod properties;
pub mod rng;
pub mod scalar;
pub mod sim;

pub use scalar::RealScalar;

pub type CMatrix64 = linalg::CMatrix<f64>;
pub type CMatrix32 = linalg::CMatrix<f32>;
pub type ChannelSet64 = channel::ChannelSet<f64>;
pub type ChannelSet32 = channel::ChannelSet<f32>;
pub type Precoder64 = precoder::Precoder<f64>;
pub type Precoder32 = precoder::Precoder<f32>;
pub type HermitianEig64 = linalg::HermitianEig<f64>;
pub type HermitianEig32 = linalg::HermitianEig<f32>;
