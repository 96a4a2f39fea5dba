//! Randomized invariant suite for the two diagonalizations and the stream margins.
//!
//! Instance `i` cycles through `L ∈ {1, 2, 3}` and `σ² ∈ {1e-3, 0.1, 1, 10}` at
//! N=8, M=3, K=2 and checks every user. Each check keeps a pass/fail count and
//! the worst value seen, so a report says how close the suite came to failing.

use std::fmt;

use crate::channel::{draw_channel_set, ChannelSet, SystemDims};
use crate::linalg::CMatrix;
use crate::metrics::{approx_stream_sinr, filter_noise_covariance, stream_margins_db};
use crate::precoder::{
    build_pair, ged_diagonalize, original_precoder, proposed_precoder, simultaneous_diagonalize, slnr_value,
    PrecoderError,
};
use crate::rng::{substream, PROPERTY_LANE};

pub const DEFAULT_INSTANCES: usize = 200;
pub const STREAM_CYCLE: [usize; 3] = [1, 2, 3];
pub const NOISE_CYCLE: [f64; 4] = [1e-3, 0.1, 1.0, 10.0];

/// Ties closer than this relative gap are not held to the strict margin inequality.
const TIE_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Check {
    PairResidualA,
    PairResidualB,
    ThetaOmegaSum,
    ThetaOrderRank,
    GedResidual,
    SpectrumLink,
    MarginInequality,
    MarginIdentity,
    SlnrValues,
    SlnrRelaxation,
    StreamDiagonal,
    NoiseCovariance,
    PowerConstraint,
    SingleStreamParallel,
}

impl Check {
    pub const ALL: [Check; 14] = [
        Check::PairResidualA,
        Check::PairResidualB,
        Check::ThetaOmegaSum,
        Check::ThetaOrderRank,
        Check::GedResidual,
        Check::SpectrumLink,
        Check::MarginInequality,
        Check::MarginIdentity,
        Check::SlnrValues,
        Check::SlnrRelaxation,
        Check::StreamDiagonal,
        Check::NoiseCovariance,
        Check::PowerConstraint,
        Check::SingleStreamParallel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::PairResidualA => "pair residual on A",
            Check::PairResidualB => "pair residual on B",
            Check::ThetaOmegaSum => "theta + omega = 1",
            Check::ThetaOrderRank => "theta order and rank",
            Check::GedResidual => "GED residuals",
            Check::SpectrumLink => "lambda = theta/omega",
            Check::MarginInequality => "balanced margin is smaller",
            Check::MarginIdentity => "margin identity (dB)",
            Check::SlnrValues => "closed-form SLNR",
            Check::SlnrRelaxation => "SLNR relaxation",
            Check::StreamDiagonal => "inter-stream interference free",
            Check::NoiseCovariance => "MF noise covariance",
            Check::PowerConstraint => "power constraint",
            Check::SingleStreamParallel => "L=1 columns parallel",
        }
    }

    /// Largest tolerated value of the recorded quantity.
    pub fn tolerance(self) -> f64 {
        match self {
            Check::PairResidualA | Check::PairResidualB | Check::GedResidual => 1e-8,
            Check::ThetaOmegaSum | Check::ThetaOrderRank | Check::MarginIdentity | Check::PowerConstraint => 1e-10,
            Check::SpectrumLink | Check::SlnrValues | Check::StreamDiagonal | Check::NoiseCovariance => 1e-8,
            Check::SingleStreamParallel => 1e-8,
            // |Δ′| − |Δ| must stay negative; ties are skipped.
            Check::MarginInequality => 0.0,
            Check::SlnrRelaxation => 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckSummary {
    pub check: Check,
    pub passed: usize,
    pub failed: usize,
    pub worst: f64,
}

impl CheckSummary {
    fn new(check: Check) -> Self {
        Self {
            check,
            passed: 0,
            failed: 0,
            worst: f64::NEG_INFINITY,
        }
    }

    fn record(&mut self, value: f64) {
        self.worst = self.worst.max(value);
        let ok = if self.check == Check::MarginInequality {
            value < 0.0
        } else {
            value <= self.check.tolerance()
        };
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
    }

    fn fail(&mut self) {
        self.worst = f64::INFINITY;
        self.failed += 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyReport {
    pub instances: usize,
    pub checks: Vec<CheckSummary>,
    pub errors: Vec<String>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.errors.is_empty() && self.checks.iter().all(|c| c.failed == 0)
    }

    pub fn summary(&self, check: Check) -> &CheckSummary {
        self.checks
            .iter()
            .find(|c| c.check == check)
            .expect("every check is tracked")
    }

    fn slot(&mut self, check: Check) -> &mut CheckSummary {
        self.checks
            .iter_mut()
            .find(|c| c.check == check)
            .expect("every check is tracked")
    }
}

impl fmt::Display for PropertyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invariant suite over {} instances", self.instances)?;
        for c in &self.checks {
            let status = if c.failed == 0 { "PASS" } else { "FAIL" };
            writeln!(
                f,
                "  {status} {:<32} passed={:<4} failed={:<4} worst={:.3e} (limit {:.0e})",
                c.check.name(),
                c.passed,
                c.failed,
                c.worst,
                c.check.tolerance()
            )?;
        }
        for e in &self.errors {
            writeln!(f, "  ERROR {e}")?;
        }
        Ok(())
    }
}

/// Random instance `index` of the suite.
pub fn property_instance(master_seed: u64, index: usize) -> ChannelSet<f64> {
    let streams = STREAM_CYCLE[index % STREAM_CYCLE.len()];
    let sigma2 = NOISE_CYCLE[(index / STREAM_CYCLE.len()) % NOISE_CYCLE.len()];
    let dims = SystemDims::new(8, 3, 2, streams).expect("suite dimensions are valid");
    let mut rng = substream(master_seed, index as u64, PROPERTY_LANE);
    draw_channel_set(dims, sigma2, &mut rng).expect("suite parameters are valid")
}

pub fn run_property_suite(master_seed: u64, instances: usize) -> PropertyReport {
    let mut report = PropertyReport {
        instances,
        checks: Check::ALL.iter().map(|&c| CheckSummary::new(c)).collect(),
        errors: Vec::new(),
    };
    for i in 0..instances {
        let cs = property_instance(master_seed, i);
        for k in 0..cs.dims().users {
            if let Err(e) = check_user(&cs, k, &mut report) {
                report.errors.push(format!("instance {i}, user {k}: {e}"));
            }
        }
    }
    report
}

fn rel(value: f64, reference: f64) -> f64 {
    value / reference.max(f64::MIN_POSITIVE)
}

/// `‖X^H S X − diag(d)‖_F`.
fn congruence_defect(s: &CMatrix<f64>, x: &CMatrix<f64>, d: &[f64]) -> f64 {
    let reduced = x.adjoint_mul(&(s * x));
    (&reduced - &CMatrix::from_real_diagonal(d)).frobenius_norm()
}

fn check_user(cs: &ChannelSet<f64>, k: usize, report: &mut PropertyReport) -> Result<(), PrecoderError> {
    let dims = cs.dims();
    let (n, m, l) = (dims.tx_antennas, dims.rx_antennas, dims.streams);
    let sigma2 = cs.noise_variance();
    let (a, b) = build_pair(cs, k)?;
    let pair = simultaneous_diagonalize(&a, &b)?;
    let ged = ged_diagonalize(&a, &b)?;
    let (theta, omega, lambda) = (&pair.theta, &pair.omega, &ged.lambda);

    report
        .slot(Check::PairResidualA)
        .record(rel(congruence_defect(&a, &pair.transform, theta), a.frobenius_norm()));
    report
        .slot(Check::PairResidualB)
        .record(rel(congruence_defect(&b, &pair.transform, omega), b.frobenius_norm()));
    // ω measured from the congruence itself, not from its definition 1 − θ
    let measured_omega = pair.transform.adjoint_mul(&(&b * &pair.transform)).real_diagonal();
    let sum_defect = theta
        .iter()
        .zip(&measured_omega)
        .map(|(t, w)| (t + w - 1.0).abs())
        .fold(0.0, f64::max);
    report.slot(Check::ThetaOmegaSum).record(sum_defect);

    let ordered = theta.windows(2).all(|w| w[0] >= w[1]) && omega.windows(2).all(|w| w[0] <= w[1]);
    let signal_ok = theta[0] < 1.0 && theta[m - 1] > 1e-10;
    let null_tail = theta[m..].iter().fold(0.0, |acc: f64, t| acc.max(t.abs()));
    if ordered && signal_ok {
        report.slot(Check::ThetaOrderRank).record(null_tail);
    } else {
        report.slot(Check::ThetaOrderRank).fail();
    }

    let ged_a = rel(congruence_defect(&a, &ged.transform, lambda), a.frobenius_norm());
    let ged_b = congruence_defect(&b, &ged.transform, &vec![1.0; n]) / n as f64;
    let ged_tail = lambda[m..].iter().fold(0.0, |acc: f64, x| acc.max(x.abs()));
    let ged_sorted = lambda.windows(2).all(|w| w[0] >= w[1]);
    if ged_sorted && ged_tail <= 1e-10 {
        report.slot(Check::GedResidual).record(ged_a.max(ged_b));
    } else {
        report.slot(Check::GedResidual).fail();
    }

    let link = (0..m)
        .map(|i| (lambda[i] - theta[i] / omega[i]).abs() / lambda[i].max(1.0))
        .fold(0.0, f64::max);
    report.slot(Check::SpectrumLink).record(link);

    let original = original_precoder(cs, k)?;
    let proposed = proposed_precoder(cs, k)?;

    let eta = approx_stream_sinr(&original, sigma2);
    let eta_balanced = approx_stream_sinr(&proposed, sigma2);
    let margins = stream_margins_db(&eta).expect("leading generalized eigenvalues are positive");
    let margins_balanced = stream_margins_db(&eta_balanced).expect("leading θ are positive");
    let mut identity = 0.0f64;
    for (hi, lo) in margins.pairs() {
        identity = identity
            .max((margins.get(hi, lo) - 10.0 * (lambda[hi] / lambda[lo]).log10()).abs())
            .max((margins_balanced.get(hi, lo) - 10.0 * (theta[hi] / theta[lo]).log10()).abs());
        let gap = (lambda[lo] - lambda[hi]) / lambda[lo];
        if gap > TIE_RTOL {
            report
                .slot(Check::MarginInequality)
                .record(margins_balanced.spread(hi, lo) - margins.spread(hi, lo));
        }
    }
    if l >= 2 {
        report.slot(Check::MarginIdentity).record(identity);
    }

    let slnr_original = slnr_value(cs, k, &original.matrix)?;
    let slnr_proposed = slnr_value(cs, k, &proposed.matrix)?;
    let expected_original = lambda[..l].iter().sum::<f64>() / l as f64;
    let expected_proposed = theta[..l].iter().sum::<f64>() / omega[..l].iter().sum::<f64>();
    report.slot(Check::SlnrValues).record(
        rel((slnr_original - expected_original).abs(), expected_original)
            .max(rel((slnr_proposed - expected_proposed).abs(), expected_proposed)),
    );
    report
        .slot(Check::SlnrRelaxation)
        .record(rel(slnr_proposed - slnr_original, slnr_original));

    let h = cs.channel(k)?;
    let mut diag_defect = 0.0f64;
    for p in [&original, &proposed] {
        let gains = (h * &p.matrix).gram();
        let scaled: Vec<f64> = p.stream_gains.iter().map(|g| p.scale * p.scale * g).collect();
        let expected = CMatrix::from_real_diagonal(&scaled);
        diag_defect = diag_defect.max(rel((&gains - &expected).frobenius_norm(), expected.frobenius_norm()));
    }
    report.slot(Check::StreamDiagonal).record(diag_defect);

    let noise_cov = filter_noise_covariance(cs, &proposed).expect("precoder belongs to this channel set");
    let scaled: Vec<f64> = theta[..l].iter().map(|t| proposed.scale * proposed.scale * t).collect();
    let expected = CMatrix::from_real_diagonal(&scaled);
    report.slot(Check::NoiseCovariance).record(rel(
        (&noise_cov - &expected).frobenius_norm(),
        expected.frobenius_norm(),
    ));

    let power = [&original, &proposed]
        .iter()
        .map(|p| (p.matrix.frobenius_norm().powi(2) - l as f64).abs() / l as f64)
        .fold(0.0, f64::max);
    report.slot(Check::PowerConstraint).record(power);

    if l == 1 {
        report
            .slot(Check::SingleStreamParallel)
            .record(parallel_defect(&original.matrix, &proposed.matrix));
    }
    Ok(())
}

/// `1 − |u^H v| / (‖u‖ ‖v‖)` for two column vectors.
pub fn parallel_defect(u: &CMatrix<f64>, v: &CMatrix<f64>) -> f64 {
    let inner = u.adjoint_mul(v)[(0, 0)].norm();
    1.0 - inner / (u.frobenius_norm() * v.frobenius_norm())
}
