//! Uncoded link-level BER and sum-rate simulation over i.i.d. block-fading channels.
//!
//! Trials are addressed by a global index that selects the channel and payload
//! substreams, so a given trial sees the same channel at every SNR point and for
//! every scheme. Trials run in fixed-size batches; batches of one round run in
//! parallel on the current rayon pool and are merged in index order, so the
//! stopping point and every accumulated sum are independent of the worker count.

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{complex_gaussian, draw_channel_set_for_trial, ChannelError, ChannelSet, SystemDims};
use crate::linalg::CMatrix;
use crate::metrics::{sum_rate, MetricsError};
use crate::precoder::{all_precoders, Precoder, PrecoderError, Scheme};
use crate::rng::{substream, PAYLOAD_LANE};
use crate::scalar::RealScalar;

/// Trials per work unit. Fixed so results never depend on scheduling.
pub const BATCH_TRIALS: u64 = 256;
/// Upper bound on batches dispatched together in one round.
const MAX_ROUND_BATCHES: u64 = 64;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("QPSK needs an even number of bits, got {0}")]
    LengthMismatch(usize),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("target BER {target:e} is not bracketed by the curve")]
    TargetNotBracketed { target: f64 },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Precoder(#[from] PrecoderError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dims: SystemDims,
    /// Transmit SNR `L / σ²` in dB, strictly increasing.
    pub snr_grid_db: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub max_trials: u64,
    pub min_bit_errors: u64,
    pub master_seed: u64,
    /// Skip the rest of the SNR grid once every scheme's BER is below this value.
    #[serde(default)]
    pub stop_below_ber: Option<f64>,
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        self.dims.validate()?;
        if self.snr_grid_db.is_empty() {
            return Err(SimError::InvalidConfig("SNR grid must be nonempty".into()));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(SimError::InvalidConfig("SNR grid must be finite".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SimError::InvalidConfig("SNR grid must be strictly increasing".into()));
        }
        if self.schemes.is_empty() {
            return Err(SimError::InvalidConfig("at least one scheme is required".into()));
        }
        if self.max_trials < 1 {
            return Err(SimError::InvalidConfig("max_trials ≥ 1".into()));
        }
        if let Some(floor) = self.stop_below_ber {
            if !(floor > 0.0 && floor < 1.0) {
                return Err(SimError::InvalidConfig("stop_below_ber must lie in (0, 1)".into()));
            }
        }
        Ok(())
    }
}

/// σ² giving transmit SNR `L / σ²` of `snr_db`.
pub fn noise_variance_for_snr(streams: usize, snr_db: f64) -> f64 {
    streams as f64 / 10f64.powf(snr_db / 10.0)
}

/// One (SNR, scheme) point of a BER curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub bit_errors: u64,
    pub bits_simulated: u64,
    pub ber: f64,
    pub sum_rate_mean: f64,
    pub sum_rate_stderr: f64,
    pub trials: u64,
    /// Bit errors per user.
    pub user_bit_errors: Vec<u64>,
    /// False when the trial cap was hit before `min_bit_errors` errors.
    pub resolved: bool,
}

impl BerPoint {
    /// Binomial standard deviation of the BER estimate.
    pub fn ber_stddev(&self) -> f64 {
        (self.ber * (1.0 - self.ber) / self.bits_simulated as f64).sqrt()
    }
}

/// Gray-mapped unit-energy QPSK: `(b0, b1) → ((1 − 2 b0) + j (1 − 2 b1)) / √2`.
pub fn modulate_qpsk<T: RealScalar>(bits: &[bool]) -> Result<Vec<Complex<T>>, SimError> {
    if !bits.len().is_multiple_of(2) {
        return Err(SimError::LengthMismatch(bits.len()));
    }
    let a = T::FRAC_1_SQRT_2();
    let level = |b: bool| if b { -a } else { a };
    Ok(bits
        .chunks_exact(2)
        .map(|p| Complex::new(level(p[0]), level(p[1])))
        .collect())
}

/// Quadrant hard decision, inverse of [`modulate_qpsk`].
pub fn demodulate_qpsk<T: RealScalar>(symbols: &[Complex<T>]) -> Vec<bool> {
    symbols
        .iter()
        .flat_map(|z| [z.re < T::zero(), z.im < T::zero()])
        .collect()
}

/// Bit errors of one trial.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialErrors {
    pub user_bit_errors: Vec<u64>,
    pub bits_per_user: u64,
}

impl TrialErrors {
    pub fn total(&self) -> u64 {
        self.user_bit_errors.iter().sum()
    }
}

/// One vector-symbol transmission with fixed precoders.
///
/// Draw order from `rng` is bits of every user, then noise of every user, so two
/// schemes fed clones of the same stream see identical symbols and noise.
pub fn transmit_and_detect<T: RealScalar, R: Rng + ?Sized>(
    cs: &ChannelSet<T>,
    precoders: &[Precoder<T>],
    rng: &mut R,
) -> Result<TrialErrors, SimError> {
    let dims = cs.dims();
    let (n, m, k_users, l) = (dims.tx_antennas, dims.rx_antennas, dims.users, dims.streams);
    if precoders.len() != k_users {
        return Err(MetricsError::PrecoderCount {
            expected: k_users,
            got: precoders.len(),
        }
        .into());
    }

    let bits: Vec<Vec<bool>> = (0..k_users)
        .map(|_| (0..2 * l).map(|_| rng.random()).collect())
        .collect();
    let sigma = cs.noise_variance().sqrt();
    let noise: Vec<Vec<Complex<T>>> = (0..k_users)
        .map(|_| (0..m).map(|_| complex_gaussian::<T, _>(rng) * sigma).collect())
        .collect();

    let mut x = CMatrix::zeros(n, 1);
    for (p, b) in precoders.iter().zip(&bits) {
        let s = modulate_qpsk::<T>(b)?;
        let s = CMatrix::new(l, 1, s).expect("symbol vector");
        x = &x + &(&p.matrix * &s);
    }

    let mut user_bit_errors = Vec::with_capacity(k_users);
    for (k, p) in precoders.iter().enumerate() {
        let h = cs.channel(k)?;
        let mut r = h * &x;
        for (i, z) in noise[k].iter().enumerate() {
            r[(i, 0)] += z;
        }
        let effective = h * &p.matrix;
        let decided = demodulate_qpsk(effective.adjoint_mul(&r).as_slice());
        let errors = decided.iter().zip(&bits[k]).filter(|(a, b)| a != b).count();
        user_bit_errors.push(errors as u64);
    }
    Ok(TrialErrors {
        user_bit_errors,
        bits_per_user: 2 * l as u64,
    })
}

/// Design the precoders for `scheme` and run one transmission.
pub fn simulate_trial<T: RealScalar, R: Rng + ?Sized>(
    cs: &ChannelSet<T>,
    scheme: Scheme,
    rng: &mut R,
) -> Result<TrialErrors, SimError> {
    let precoders = all_precoders(cs, scheme)?;
    transmit_and_detect(cs, &precoders, rng)
}

#[derive(Debug, Clone, Default)]
struct Tally {
    user_bit_errors: Vec<u64>,
    bits: u64,
    trials: u64,
    rate_sum: f64,
    rate_sq_sum: f64,
}

impl Tally {
    fn new(users: usize) -> Self {
        Self {
            user_bit_errors: vec![0; users],
            ..Self::default()
        }
    }

    fn bit_errors(&self) -> u64 {
        self.user_bit_errors.iter().sum()
    }

    fn merge(&mut self, other: &Tally) {
        for (a, b) in self.user_bit_errors.iter_mut().zip(&other.user_bit_errors) {
            *a += b;
        }
        self.bits += other.bits;
        self.trials += other.trials;
        self.rate_sum += other.rate_sum;
        self.rate_sq_sum += other.rate_sq_sum;
    }

    fn into_point(self, snr_db: f64, scheme: Scheme, min_bit_errors: u64) -> BerPoint {
        let bit_errors = self.bit_errors();
        let n = self.trials as f64;
        let mean = self.rate_sum / n;
        let stderr = if self.trials > 1 {
            let var = ((self.rate_sq_sum - n * mean * mean) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        BerPoint {
            snr_db,
            scheme,
            bit_errors,
            bits_simulated: self.bits,
            ber: bit_errors as f64 / self.bits as f64,
            sum_rate_mean: mean,
            sum_rate_stderr: stderr,
            trials: self.trials,
            user_bit_errors: self.user_bit_errors,
            resolved: bit_errors >= min_bit_errors,
        }
    }
}

fn run_batch<T: RealScalar>(
    cfg: &SimConfig,
    schemes: &[Scheme],
    noise_variance: T,
    trials: std::ops::Range<u64>,
) -> Result<Vec<Tally>, SimError> {
    let users = cfg.dims.users;
    let mut tallies = vec![Tally::new(users); schemes.len()];
    for trial in trials {
        let cs = draw_channel_set_for_trial(cfg.dims, noise_variance, cfg.master_seed, trial)?;
        let payload = substream(cfg.master_seed, trial, PAYLOAD_LANE);
        for (tally, &scheme) in tallies.iter_mut().zip(schemes) {
            let precoders = all_precoders(&cs, scheme)?;
            let outcome = transmit_and_detect(&cs, &precoders, &mut payload.clone())?;
            let rate = sum_rate(&cs, &precoders)?;
            for (a, b) in tally.user_bit_errors.iter_mut().zip(&outcome.user_bit_errors) {
                *a += b;
            }
            tally.bits += outcome.bits_per_user * users as u64;
            tally.trials += 1;
            tally.rate_sum += rate;
            tally.rate_sq_sum += rate * rate;
        }
    }
    Ok(tallies)
}

/// Simulate one SNR point for every configured scheme on shared trials.
pub fn run_point<T: RealScalar>(cfg: &SimConfig, snr_db: f64) -> Result<Vec<BerPoint>, SimError> {
    run_point_for::<T>(cfg, &cfg.schemes, snr_db)
}

/// Simulate one SNR point for `schemes`.
///
/// Every scheme sees the same trials. A scheme stops after the first batch at
/// which it has `min_bit_errors` errors, or at `max_trials`; the others carry on.
pub fn run_point_for<T: RealScalar>(
    cfg: &SimConfig,
    schemes: &[Scheme],
    snr_db: f64,
) -> Result<Vec<BerPoint>, SimError> {
    let noise_variance = T::lit(noise_variance_for_snr(cfg.dims.streams, snr_db));
    let mut totals = vec![Tally::new(cfg.dims.users); schemes.len()];
    let mut active: Vec<usize> = (0..schemes.len()).collect();
    let mut next_trial = 0u64;
    let mut round = 1u64;
    while next_trial < cfg.max_trials && !active.is_empty() {
        let ranges: Vec<std::ops::Range<u64>> = (0..round)
            .map(|b| next_trial + b * BATCH_TRIALS)
            .take_while(|&start| start < cfg.max_trials)
            .map(|start| start..(start + BATCH_TRIALS).min(cfg.max_trials))
            .collect();
        let running: Vec<Scheme> = active.iter().map(|&i| schemes[i]).collect();
        let results: Vec<Result<Vec<Tally>, SimError>> = ranges
            .par_iter()
            .map(|r| run_batch::<T>(cfg, &running, noise_variance, r.clone()))
            .collect();
        let mut still = active.clone();
        for (range, batch) in ranges.iter().zip(results) {
            for (&i, part) in active.iter().zip(batch?) {
                if still.contains(&i) {
                    totals[i].merge(&part);
                }
            }
            still.retain(|&i| totals[i].bit_errors() < cfg.min_bit_errors);
            next_trial = range.end;
            if still.is_empty() {
                break;
            }
        }
        active = still;
        round = (round * 2).min(MAX_ROUND_BATCHES);
    }
    Ok(totals
        .into_iter()
        .zip(schemes)
        .map(|(t, &scheme)| t.into_point(snr_db, scheme, cfg.min_bit_errors))
        .collect())
}

/// Full BER/sum-rate sweep: one point per (SNR, scheme), SNR-major order.
///
/// With `stop_below_ber` set, a scheme is dropped from the rest of the grid
/// after its first point with BER below the floor.
pub fn run_sweep<T: RealScalar>(cfg: &SimConfig) -> Result<Vec<BerPoint>, SimError> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(cfg.snr_grid_db.len() * cfg.schemes.len());
    let mut schemes = cfg.schemes.clone();
    for &snr in &cfg.snr_grid_db {
        if schemes.is_empty() {
            break;
        }
        let points = run_point_for::<T>(cfg, &schemes, snr)?;
        if let Some(floor) = cfg.stop_below_ber {
            schemes.retain(|s| points.iter().any(|p| p.scheme == *s && p.ber >= floor));
        }
        out.extend(points);
    }
    Ok(out)
}

/// Points of one scheme, in sweep order.
pub fn scheme_curve(points: &[BerPoint], scheme: Scheme) -> Vec<BerPoint> {
    points.iter().filter(|p| p.scheme == scheme).cloned().collect()
}

/// SNR (dB) where the curve crosses `target_ber`, interpolating SNR linearly in log10(BER).
///
/// `curve` must hold one scheme's points in increasing SNR order.
pub fn interpolate_snr_at_ber(curve: &[BerPoint], target_ber: f64) -> Result<f64, SimError> {
    let not_bracketed = SimError::TargetNotBracketed { target: target_ber };
    if !(target_ber > 0.0) {
        return Err(not_bracketed);
    }
    if let Some(hit) = curve.iter().find(|p| p.ber == target_ber) {
        return Ok(hit.snr_db);
    }
    for w in curve.windows(2) {
        let (hi, lo) = (&w[0], &w[1]);
        if hi.ber > target_ber && lo.ber < target_ber && lo.ber > 0.0 {
            let (y0, y1) = (hi.ber.log10(), lo.ber.log10());
            let frac = (target_ber.log10() - y0) / (y1 - y0);
            return Ok(hi.snr_db + frac * (lo.snr_db - hi.snr_db));
        }
    }
    Err(not_bracketed)
}

/// True if BER never rises by more than `slack_sigmas` binomial deviations between neighbours.
pub fn is_monotone_decreasing(curve: &[BerPoint], slack_sigmas: f64) -> bool {
    curve.windows(2).all(|w| {
        let slack = slack_sigmas * w[0].ber_stddev().hypot(w[1].ber_stddev());
        w[1].ber <= w[0].ber + slack
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SystemDims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn point(snr_db: f64, ber: f64) -> BerPoint {
        BerPoint {
            snr_db,
            scheme: Scheme::Original,
            bit_errors: 0,
            bits_simulated: 1,
            ber,
            sum_rate_mean: 0.0,
            sum_rate_stderr: 0.0,
            trials: 1,
            user_bit_errors: vec![],
            resolved: true,
        }
    }

    #[test]
    fn qpsk_mapping() {
        let s = modulate_qpsk::<f64>(&[false, false, true, false, true, true, false, true]).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(s[0], Complex::new(r, r));
        assert_eq!(s[1], Complex::new(-r, r));
        assert_eq!(s[2], Complex::new(-r, -r));
        assert_eq!(s[3], Complex::new(r, -r));
        for z in &s {
            assert!((z.norm_sqr() - 1.0).abs() < 1e-15);
        }
        assert!(matches!(
            modulate_qpsk::<f64>(&[true]),
            Err(SimError::LengthMismatch(1))
        ));
    }

    #[test]
    fn gray_neighbours_differ_in_one_bit() {
        // counter-clockwise order of quadrants: 00, 10, 11, 01
        let ring = [[false, false], [true, false], [true, true], [false, true]];
        for i in 0..4 {
            let a = ring[i];
            let b = ring[(i + 1) % 4];
            let sa = modulate_qpsk::<f64>(&a).unwrap()[0];
            let sb = modulate_qpsk::<f64>(&b).unwrap()[0];
            assert!(((sa - sb).norm() - 2f64.sqrt()).abs() < 1e-12, "adjacent points");
            assert_eq!(a.iter().zip(&b).filter(|(x, y)| x != y).count(), 1);
        }
    }

    #[test]
    fn demodulation_inverts_modulation() {
        let bits = [true, false, false, true, true, true];
        let s = modulate_qpsk::<f32>(&bits).unwrap();
        assert_eq!(demodulate_qpsk(&s), bits);
    }

    #[test]
    fn noiseless_interference_free_trial_is_error_free() {
        let dims = SystemDims::new(4, 2, 2, 2).unwrap();
        let h1 = CMatrix::<f64>::from_real_rows(&[&[2.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]]);
        let h2 = CMatrix::<f64>::from_real_rows(&[&[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]);
        let cs = ChannelSet::new(dims, vec![h1, h2], 1e-6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for scheme in Scheme::ALL {
            for _ in 0..200 {
                assert_eq!(simulate_trial(&cs, scheme, &mut rng).unwrap().total(), 0);
            }
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let dims = SystemDims::new(8, 3, 2, 3).unwrap();
        let cs = draw_channel_set_for_trial::<f64>(dims, 0.3, 1, 2).unwrap();
        let a = simulate_trial(&cs, Scheme::Proposed, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let b = simulate_trial(&cs, Scheme::Proposed, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.bits_per_user, 6);
    }

    #[test]
    fn very_low_snr_is_coin_flipping() {
        let dims = SystemDims::new(8, 3, 2, 2).unwrap();
        let sigma2 = noise_variance_for_snr(2, -60.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (mut errors, mut bits) = (0u64, 0u64);
        let mut trial = 0;
        while bits < 100_000 {
            let cs = draw_channel_set_for_trial::<f64>(dims, sigma2, 99, trial).unwrap();
            let out = simulate_trial(&cs, Scheme::Original, &mut rng).unwrap();
            errors += out.total();
            bits += out.bits_per_user * 2;
            trial += 1;
        }
        let ber = errors as f64 / bits as f64;
        assert!((ber - 0.5).abs() < 0.02, "ber {ber}");
    }

    #[test]
    fn snr_to_noise_variance() {
        assert!((noise_variance_for_snr(2, 0.0) - 2.0).abs() < 1e-15);
        assert!((noise_variance_for_snr(3, 10.0) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn interpolation_examples() {
        let curve = [point(10.0, 1e-3), point(12.0, 1e-5)];
        assert!((interpolate_snr_at_ber(&curve, 1e-4).unwrap() - 11.0).abs() < 1e-12);
        let exact = [point(8.0, 1e-2), point(10.0, 1e-4), point(12.0, 1e-6)];
        assert_eq!(interpolate_snr_at_ber(&exact, 1e-4).unwrap(), 10.0);
        let high = [point(0.0, 0.1), point(2.0, 0.05)];
        assert!(matches!(
            interpolate_snr_at_ber(&high, 1e-4),
            Err(SimError::TargetNotBracketed { .. })
        ));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig {
            dims: SystemDims::new(8, 3, 2, 2).unwrap(),
            snr_grid_db: vec![0.0, 2.0],
            schemes: Scheme::ALL.to_vec(),
            max_trials: 10,
            min_bit_errors: 0,
            master_seed: 1,
            stop_below_ber: None,
        };
        assert!(cfg.validate().is_ok());
        cfg.snr_grid_db = vec![2.0, 2.0];
        assert!(cfg.validate().is_err());
        cfg.snr_grid_db = vec![];
        assert!(cfg.validate().is_err());
        cfg.snr_grid_db = vec![0.0];
        cfg.max_trials = 0;
        assert!(cfg.validate().is_err());
        cfg.max_trials = 1;
        cfg.stop_below_ber = Some(1.5);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_respects_trial_cap_and_is_repeatable() {
        let cfg = SimConfig {
            dims: SystemDims::new(4, 2, 2, 2).unwrap(),
            snr_grid_db: vec![0.0, 30.0],
            schemes: Scheme::ALL.to_vec(),
            max_trials: 300,
            min_bit_errors: 1_000_000,
            master_seed: 4,
            stop_below_ber: None,
        };
        let a = run_sweep::<f64>(&cfg).unwrap();
        assert_eq!(a.len(), 4);
        for p in &a {
            assert_eq!(p.trials, 300);
            assert_eq!(p.bits_simulated, 300 * 2 * 4);
            assert!(!p.resolved);
            assert_eq!(p.ber, p.bit_errors as f64 / p.bits_simulated as f64);
        }
        assert_eq!(a, run_sweep::<f64>(&cfg).unwrap());
    }

    #[test]
    fn sweep_stops_once_errors_collected() {
        let cfg = SimConfig {
            dims: SystemDims::new(4, 2, 2, 1).unwrap(),
            snr_grid_db: vec![0.0],
            schemes: vec![Scheme::Proposed],
            max_trials: 1_000_000,
            min_bit_errors: 50,
            master_seed: 4,
            stop_below_ber: None,
        };
        let p = &run_sweep::<f64>(&cfg).unwrap()[0];
        assert!(p.resolved);
        assert!(p.trials.is_multiple_of(BATCH_TRIALS) && p.trials <= 4 * BATCH_TRIALS);
    }

    #[test]
    fn sweep_stops_below_ber_floor() {
        let cfg = SimConfig {
            dims: SystemDims::new(4, 1, 2, 1).unwrap(),
            snr_grid_db: vec![-10.0, 40.0, 50.0],
            schemes: Scheme::ALL.to_vec(),
            max_trials: 512,
            min_bit_errors: 10,
            master_seed: 2,
            stop_below_ber: Some(1e-3),
        };
        let points = run_sweep::<f64>(&cfg).unwrap();
        assert_eq!(points.len(), 4);
        assert!(points[2..].iter().all(|p| p.snr_db == 40.0 && p.ber < 1e-3));
    }

    #[test]
    fn schemes_stop_independently_on_shared_trials() {
        let cfg = SimConfig {
            dims: SystemDims::new(8, 3, 2, 2).unwrap(),
            snr_grid_db: vec![4.0],
            schemes: Scheme::ALL.to_vec(),
            max_trials: 20_000,
            min_bit_errors: 40,
            master_seed: 9,
            stop_below_ber: None,
        };
        let joint = run_point::<f64>(&cfg, 4.0).unwrap();
        let original = run_point_for::<f64>(&cfg, &[Scheme::Original], 4.0).unwrap();
        let proposed = run_point_for::<f64>(&cfg, &[Scheme::Proposed], 4.0).unwrap();
        assert_eq!(joint, vec![original[0].clone(), proposed[0].clone()]);
        assert!(joint.iter().all(|p| p.resolved));
    }
}
