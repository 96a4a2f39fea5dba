//! Receiver-side quantities under matched-filter detection.

use thiserror::Error;

use crate::channel::{ChannelError, ChannelSet};
use crate::linalg::CMatrix;
use crate::precoder::Precoder;
use crate::scalar::RealScalar;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("stream SINR must be positive, got {value:e} at stream {stream}")]
    NonPositiveSinr { stream: usize, value: f64 },
    #[error("expected one precoder per user ({expected}), got {got}")]
    PrecoderCount { expected: usize, got: usize },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Matched-filter receive matrix `G = (H_k F_k)^H` (L×M).
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveFilter<T> {
    pub user: usize,
    pub matrix: CMatrix<T>,
}

/// Pairwise stream margins in dB: `db[l][m] = 10 log10(sinr_l / sinr_m)`.
///
/// The table is antisymmetric. Streams are ordered strongest first, so entries
/// below the diagonal (`l > m`) are non-positive; [`MarginTable::spread`] gives
/// the magnitude of the gap.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginTable {
    pub db: Vec<Vec<f64>>,
}

impl MarginTable {
    pub fn streams(&self) -> usize {
        self.db.len()
    }

    /// `Δ_{l,m}` (zero-based stream indices).
    pub fn get(&self, l: usize, m: usize) -> f64 {
        self.db[l][m]
    }

    /// `|Δ_{l,m}|`.
    pub fn spread(&self, l: usize, m: usize) -> f64 {
        self.db[l][m].abs()
    }

    /// Pairs `(l, m)` with `l > m`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.streams()).flat_map(|l| (0..l).map(move |m| (l, m)))
    }
}

/// Per-user SINR summary for one scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamSinrReport {
    pub user: usize,
    pub exact_sinr: Vec<f64>,
    pub approx_sinr: Vec<f64>,
    pub margins_db: MarginTable,
}

pub fn matched_filter<T: RealScalar>(cs: &ChannelSet<T>, p: &Precoder<T>) -> Result<ReceiveFilter<T>, MetricsError> {
    let effective = cs.channel(p.user)? * &p.matrix;
    Ok(ReceiveFilter {
        user: p.user,
        matrix: effective.adjoint(),
    })
}

/// Effective post-filter channel `G H_k F_k`, diagonal for both schemes.
pub fn effective_stream_gains<T: RealScalar>(cs: &ChannelSet<T>, p: &Precoder<T>) -> Result<CMatrix<T>, MetricsError> {
    let effective = cs.channel(p.user)? * &p.matrix;
    Ok(effective.gram())
}

fn check_count<T>(cs: &ChannelSet<T>, precoders: &[Precoder<T>]) -> Result<(), MetricsError>
where
    T: RealScalar,
{
    let expected = cs.dims().users;
    if precoders.len() != expected {
        return Err(MetricsError::PrecoderCount {
            expected,
            got: precoders.len(),
        });
    }
    Ok(())
}

/// Signal, co-channel interference and noise power of every stream of user `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamPowers {
    pub signal: Vec<f64>,
    pub interference: Vec<f64>,
    pub noise: Vec<f64>,
}

impl StreamPowers {
    pub fn sinr(&self) -> Vec<f64> {
        self.signal
            .iter()
            .zip(&self.interference)
            .zip(&self.noise)
            .map(|((s, i), n)| s / (i + n))
            .collect()
    }

    pub fn interference_to_noise(&self) -> Vec<f64> {
        self.interference.iter().zip(&self.noise).map(|(i, n)| i / n).collect()
    }
}

/// Per-stream powers after the matched filter of user `k`, given all users' precoders.
pub fn stream_powers<T: RealScalar>(
    cs: &ChannelSet<T>,
    precoders: &[Precoder<T>],
    k: usize,
) -> Result<StreamPowers, MetricsError> {
    check_count(cs, precoders)?;
    let h = cs.channel(k)?;
    let own = &precoders[k];
    let g = matched_filter(cs, own)?.matrix;
    let sigma2 = cs.noise_variance().to_f64_lossy();
    let direct = &g * &(h * &own.matrix);
    debug_assert!(
        direct.off_diagonal_norm() <= T::tol(1e-6, 4096.0) * direct.frobenius_norm(),
        "matched filter leaves inter-stream interference"
    );

    let streams = g.rows();
    let mut interference = vec![0.0; streams];
    for (i, other) in precoders.iter().enumerate() {
        if i == k {
            continue;
        }
        let cross = &g * &(h * &other.matrix);
        for (l, acc) in interference.iter_mut().enumerate() {
            *acc += cross.row(l).iter().map(|z| z.norm_sqr().to_f64_lossy()).sum::<f64>();
        }
    }
    let signal = (0..streams).map(|l| direct[(l, l)].norm_sqr().to_f64_lossy()).collect();
    let noise = (0..streams)
        .map(|l| sigma2 * g.row(l).iter().map(|z| z.norm_sqr().to_f64_lossy()).sum::<f64>())
        .collect();
    Ok(StreamPowers {
        signal,
        interference,
        noise,
    })
}

/// Exact post-filter SINR per stream of user `k`, counting CCI from all other users.
pub fn exact_stream_sinr<T: RealScalar>(
    cs: &ChannelSet<T>,
    precoders: &[Precoder<T>],
    k: usize,
) -> Result<Vec<f64>, MetricsError> {
    Ok(stream_powers(cs, precoders, k)?.sinr())
}

/// CCI-free approximation `scale² · gain_l / σ²`.
pub fn approx_stream_sinr<T: RealScalar>(p: &Precoder<T>, sigma2: T) -> Vec<f64> {
    let s2 = (p.scale * p.scale).to_f64_lossy();
    let sigma2 = sigma2.to_f64_lossy();
    p.stream_gains.iter().map(|g| s2 * g.to_f64_lossy() / sigma2).collect()
}

pub fn stream_margins_db(sinr: &[f64]) -> Result<MarginTable, MetricsError> {
    if let Some((stream, &value)) = sinr.iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(MetricsError::NonPositiveSinr { stream, value });
    }
    let n = sinr.len();
    let mut db = vec![vec![0.0; n]; n];
    for l in 0..n {
        for m in 0..l {
            let v = 10.0 * (sinr[l] / sinr[m]).log10();
            db[l][m] = v;
            db[m][l] = -v;
        }
    }
    Ok(MarginTable { db })
}

pub fn sinr_report<T: RealScalar>(
    cs: &ChannelSet<T>,
    precoders: &[Precoder<T>],
    k: usize,
) -> Result<StreamSinrReport, MetricsError> {
    let exact_sinr = exact_stream_sinr(cs, precoders, k)?;
    let approx_sinr = approx_stream_sinr(&precoders[k], cs.noise_variance());
    let margins_db = stream_margins_db(&exact_sinr)?;
    Ok(StreamSinrReport {
        user: k,
        exact_sinr,
        approx_sinr,
        margins_db,
    })
}

/// `Σ_k Σ_l log2(1 + SINR_{k,l})` in bit/s/Hz, interference treated as noise.
pub fn sum_rate<T: RealScalar>(cs: &ChannelSet<T>, precoders: &[Precoder<T>]) -> Result<f64, MetricsError> {
    let mut total = 0.0;
    for k in 0..cs.dims().users {
        total += exact_stream_sinr(cs, precoders, k)?
            .iter()
            .map(|s| (1.0 + s).log2())
            .sum::<f64>();
    }
    Ok(total)
}

/// `G G^H` for the matched filter of `p`: the noise covariance divided by σ².
pub fn filter_noise_covariance<T: RealScalar>(cs: &ChannelSet<T>, p: &Precoder<T>) -> Result<CMatrix<T>, MetricsError> {
    let g = matched_filter(cs, p)?.matrix;
    Ok(g.adjoint().gram())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::SystemDims;
    use crate::precoder::{all_precoders, Scheme};

    type M = CMatrix<f64>;

    /// N=4, M=2, K=2, L=2, users on disjoint antenna pairs, σ² = 1.
    fn disjoint_instance() -> ChannelSet<f64> {
        let dims = SystemDims::new(4, 2, 2, 2).unwrap();
        let h1 = M::from_real_rows(&[&[2.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]]);
        let h2 = M::from_real_rows(&[&[0.0, 0.0, 1.0, 0.0], &[0.0, 0.0, 0.0, 1.0]]);
        ChannelSet::new(dims, vec![h1, h2], 1.0).unwrap()
    }

    #[test]
    fn hand_computed_margins() {
        let cs = disjoint_instance();
        let orig = all_precoders(&cs, Scheme::Original).unwrap();
        let prop = all_precoders(&cs, Scheme::Proposed).unwrap();
        assert!((orig[0].stream_gains[0] - 4.0).abs() < 1e-14);
        assert!((orig[0].stream_gains[1] - 1.0).abs() < 1e-14);
        assert!((prop[0].stream_gains[0] - 0.8).abs() < 1e-14);
        assert!((prop[0].stream_gains[1] - 0.5).abs() < 1e-14);

        let d = stream_margins_db(&approx_stream_sinr(&orig[0], 1.0)).unwrap();
        let d_prime = stream_margins_db(&approx_stream_sinr(&prop[0], 1.0)).unwrap();
        assert!((d.spread(1, 0) - 10.0 * 4f64.log10()).abs() < 1e-10);
        assert!((d_prime.spread(1, 0) - 10.0 * 1.6f64.log10()).abs() < 1e-10);
        assert!((d.spread(1, 0) - 6.02).abs() < 0.01);
        assert!((d_prime.spread(1, 0) - 2.04).abs() < 0.01);
        assert!(d_prime.spread(1, 0) < d.spread(1, 0));
    }

    #[test]
    fn zero_cci_exact_equals_approx() {
        let cs = disjoint_instance();
        for scheme in Scheme::ALL {
            let ps = all_precoders(&cs, scheme).unwrap();
            for k in 0..2 {
                let powers = stream_powers(&cs, &ps, k).unwrap();
                assert!(powers.interference.iter().all(|&i| i == 0.0));
                let exact = powers.sinr();
                let approx = approx_stream_sinr(&ps[k], 1.0);
                for (e, a) in exact.iter().zip(&approx) {
                    assert!((e - a).abs() <= 1e-12 * a);
                }
            }
        }
        // proposed user 1: γ² = 2 / (1/5 + 1/2) = 20/7, SINR₁ = γ² · 4/5
        let ps = all_precoders(&cs, Scheme::Proposed).unwrap();
        let exact = exact_stream_sinr(&cs, &ps, 0).unwrap();
        assert!((exact[0] - 16.0 / 7.0).abs() < 1e-12);
        assert!((exact[1] - 10.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn matched_filter_diagonalizes() {
        let cs = disjoint_instance();
        let p = all_precoders(&cs, Scheme::Proposed).unwrap();
        let gain = effective_stream_gains(&cs, &p[0]).unwrap();
        let g2 = p[0].scale * p[0].scale;
        assert!(gain.off_diagonal_norm() < 1e-14);
        assert!((gain[(0, 0)].re - g2 * 0.8).abs() < 1e-12);
        assert!((gain[(1, 1)].re - g2 * 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_stream_filter_is_row() {
        let dims = SystemDims::new(2, 2, 2, 1).unwrap();
        let h1 = M::from_real_rows(&[&[1.0, 0.5], &[0.0, 1.0]]);
        let h2 = M::from_real_rows(&[&[0.3, 1.0], &[1.0, 0.0]]);
        let cs = ChannelSet::new(dims, vec![h1.clone(), h2], 0.5).unwrap();
        let p = all_precoders(&cs, Scheme::Original).unwrap();
        let g = matched_filter(&cs, &p[0]).unwrap().matrix;
        assert_eq!(g.shape(), (1, 2));
        assert_eq!(g, (&h1 * &p[0].matrix).adjoint());
    }

    #[test]
    fn approx_sinr_examples() {
        let p = Precoder {
            scheme: Scheme::Proposed,
            user: 0,
            matrix: M::identity(1),
            scale: 6f64.sqrt(),
            stream_gains: vec![1.0 / 6.0],
        };
        assert!((approx_stream_sinr(&p, 1.0)[0] - 1.0).abs() < 1e-14);
        assert!((approx_stream_sinr(&p, 2.0)[0] - 0.5).abs() < 1e-14);
        let flat = Precoder {
            stream_gains: vec![0.3; 3],
            ..p
        };
        let t = stream_margins_db(&approx_stream_sinr(&flat, 1.0)).unwrap();
        assert!(t.pairs().all(|(l, m)| t.get(l, m) == 0.0));
    }

    #[test]
    fn margin_table_identities() {
        let t = stream_margins_db(&[8.0, 3.0, 0.5]).unwrap();
        assert!((t.get(2, 0) - (t.get(2, 1) + t.get(1, 0))).abs() < 1e-12);
        assert!(t.pairs().all(|(l, m)| t.get(l, m) == -t.get(m, l)));
        assert_eq!(t.pairs().count(), 3);
        assert!(matches!(
            stream_margins_db(&[1.0, 0.0]),
            Err(MetricsError::NonPositiveSinr { stream: 1, .. })
        ));
    }

    #[test]
    fn sum_rate_examples() {
        // single stream per user, orthogonal users, SINR = 1 each
        let dims = SystemDims::new(2, 1, 2, 1).unwrap();
        let h1 = M::from_real_rows(&[&[1.0, 0.0]]);
        let h2 = M::from_real_rows(&[&[0.0, 1.0]]);
        let cs = ChannelSet::new(dims, vec![h1, h2], 1.0).unwrap();
        for scheme in Scheme::ALL {
            let ps = all_precoders(&cs, scheme).unwrap();
            assert!((sum_rate(&cs, &ps).unwrap() - 2.0).abs() < 1e-12);
        }
        let noisy = cs.with_noise_variance(1e12).unwrap();
        let ps = all_precoders(&noisy, Scheme::Original).unwrap();
        assert!(sum_rate(&noisy, &ps).unwrap() < 1e-10);
    }

    #[test]
    fn precoder_count_checked() {
        let cs = disjoint_instance();
        let ps = all_precoders(&cs, Scheme::Original).unwrap();
        assert!(matches!(
            exact_stream_sinr(&cs, &ps[..1], 0),
            Err(MetricsError::PrecoderCount { expected: 2, got: 1 })
        ));
    }
}
