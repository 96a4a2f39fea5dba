//! Experiment configs, sweep orchestration and result files.
//!
//! A config is a flat TOML or JSON document. Every key is optional; missing keys
//! take the defaults below. `N`, `M`, `K` and `L` are accepted as aliases of the
//! long dimension names.

use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{draw_channel_set_for_trial, SystemDims};
use crate::metrics::{exact_stream_sinr, stream_margins_db};
use crate::precoder::{all_precoders, Scheme};
use crate::sim::{
    interpolate_snr_at_ber, is_monotone_decreasing, noise_variance_for_snr, run_sweep, scheme_curve, BerPoint,
    SimConfig, SimError,
};

pub const DEFAULT_TX_ANTENNAS: usize = 8;
pub const DEFAULT_RX_ANTENNAS: usize = 3;
pub const DEFAULT_USERS: usize = 2;
pub const DEFAULT_STREAMS: usize = 2;
pub const DEFAULT_SNR_START_DB: f64 = 0.0;
pub const DEFAULT_SNR_STOP_DB: f64 = 24.0;
pub const DEFAULT_SNR_STEP_DB: f64 = 2.0;
pub const DEFAULT_MIN_BIT_ERRORS: u64 = 200;
pub const DEFAULT_MAX_TRIALS: u64 = 200_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUTPUT_STEM: &str = "ber_results";

/// BER at which the dB gain between the two schemes is reported.
pub const GAIN_TARGET_BER: f64 = 1e-4;
/// Channel realizations per SNR point in the margin report.
pub const MARGIN_REALIZATIONS: u64 = 500;

pub const CSV_HEADER: &str = "snr_db,scheme,bits,bit_errors,ber,sum_rate_mean,sum_rate_stderr";
pub const MARGIN_CSV_HEADER: &str = "snr_db,stream_l,stream_m,delta_db,delta_balanced_db,samples";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl ExperimentError {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Parse { .. } | ExperimentError::Validation(_) => 2,
            ExperimentError::Io { .. } => 3,
            ExperimentError::Numerical(_) => 1,
        }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        ExperimentError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

impl From<SimError> for ExperimentError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(msg) => ExperimentError::Validation(msg),
            SimError::Channel(crate::channel::ChannelError::InvalidDims(msg)) => ExperimentError::Validation(msg),
            other => ExperimentError::Numerical(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for OutputFormat {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(ExperimentError::Validation(format!(
                "output_format must be csv or json, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub sim: SimConfig,
    pub output_path: PathBuf,
    pub output_format: OutputFormat,
    pub report_margins: bool,
}

/// Either a single scheme name (`"both"` included) or a list of names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SchemeList {
    One(String),
    Many(Vec<String>),
}

/// Raw config document before defaults and validation.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(alias = "N", skip_serializing_if = "Option::is_none")]
    pub tx_antennas: Option<usize>,
    #[serde(alias = "M", skip_serializing_if = "Option::is_none")]
    pub rx_antennas: Option<usize>,
    #[serde(alias = "K", skip_serializing_if = "Option::is_none")]
    pub users: Option<usize>,
    #[serde(alias = "L", skip_serializing_if = "Option::is_none")]
    pub streams: Option<usize>,
    #[serde(alias = "snr_grid", skip_serializing_if = "Option::is_none")]
    pub snr_grid_db: Option<Vec<f64>>,
    #[serde(alias = "snr_start", skip_serializing_if = "Option::is_none")]
    pub snr_start_db: Option<f64>,
    #[serde(alias = "snr_stop", skip_serializing_if = "Option::is_none")]
    pub snr_stop_db: Option<f64>,
    #[serde(alias = "snr_step", skip_serializing_if = "Option::is_none")]
    pub snr_step_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schemes: Option<SchemeList>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_trials: Option<u64>,
    #[serde(alias = "min_errors", skip_serializing_if = "Option::is_none")]
    pub min_bit_errors: Option<u64>,
    #[serde(alias = "master_seed", skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_below_ber: Option<f64>,
    #[serde(alias = "out", skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(alias = "format", skip_serializing_if = "Option::is_none")]
    pub output_format: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report_margins: Option<bool>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ConfigDocument {
    /// Parse TOML, or JSON when the first non-blank character is `{`.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ExperimentError::Parse {
                line: Some(e.line()),
                message: e.to_string(),
            })
        } else {
            toml::from_str(text).map_err(|e| ExperimentError::Parse {
                line: e.span().map(|s| line_of(text, s.start)),
                message: e.message().to_string(),
            })
        }
    }

    /// Fill defaults and validate.
    pub fn into_spec(self) -> Result<ExperimentSpec, ExperimentError> {
        let dims = SystemDims {
            tx_antennas: self.tx_antennas.unwrap_or(DEFAULT_TX_ANTENNAS),
            rx_antennas: self.rx_antennas.unwrap_or(DEFAULT_RX_ANTENNAS),
            users: self.users.unwrap_or(DEFAULT_USERS),
            streams: self.streams.unwrap_or(DEFAULT_STREAMS),
        };
        let range_given = self.snr_start_db.is_some() || self.snr_stop_db.is_some() || self.snr_step_db.is_some();
        let snr_grid_db = match self.snr_grid_db {
            Some(_) if range_given => {
                return Err(ExperimentError::Validation(
                    "give either snr_grid_db or snr_start_db/snr_stop_db/snr_step_db, not both".into(),
                ))
            }
            Some(grid) => grid,
            None => snr_range(
                self.snr_start_db.unwrap_or(DEFAULT_SNR_START_DB),
                self.snr_stop_db.unwrap_or(DEFAULT_SNR_STOP_DB),
                self.snr_step_db.unwrap_or(DEFAULT_SNR_STEP_DB),
            )?,
        };
        let schemes = match self.schemes {
            None => Scheme::ALL.to_vec(),
            Some(SchemeList::One(name)) => parse_scheme_names(&[name])?,
            Some(SchemeList::Many(names)) => parse_scheme_names(&names)?,
        };
        let output_format = match self.output_format {
            Some(f) => f.parse()?,
            None => self
                .output_path
                .as_deref()
                .and_then(|p| p.extension())
                .and_then(|e| e.to_str())
                .and_then(|e| e.parse().ok())
                .unwrap_or(OutputFormat::Csv),
        };
        let output_path = self
            .output_path
            .unwrap_or_else(|| PathBuf::from(format!("{DEFAULT_OUTPUT_STEM}.{}", output_format.extension())));
        let sim = SimConfig {
            dims,
            snr_grid_db,
            schemes,
            max_trials: self.max_trials.unwrap_or(DEFAULT_MAX_TRIALS),
            min_bit_errors: self.min_bit_errors.unwrap_or(DEFAULT_MIN_BIT_ERRORS),
            master_seed: self.seed.unwrap_or(DEFAULT_SEED),
            stop_below_ber: self.stop_below_ber,
        };
        sim.validate()?;
        Ok(ExperimentSpec {
            sim,
            output_path,
            output_format,
            report_margins: self.report_margins.unwrap_or(false),
        })
    }
}

/// `start, start + step, …` up to `stop` inclusive (with a small tolerance for rounding).
pub fn snr_range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, ExperimentError> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(ExperimentError::Validation(format!(
            "SNR range needs finite start ≤ stop and step > 0, got {start}..{stop} step {step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

fn parse_scheme_names(names: &[String]) -> Result<Vec<Scheme>, ExperimentError> {
    let mut out = Vec::new();
    for name in names {
        if name.eq_ignore_ascii_case("both") {
            out.extend(Scheme::ALL);
            continue;
        }
        let scheme: Scheme = name
            .parse()
            .map_err(|_| ExperimentError::Validation(format!("unknown scheme {name:?}")))?;
        out.push(scheme);
    }
    out.dedup();
    if out.is_empty() {
        return Err(ExperimentError::Validation("at least one scheme is required".into()));
    }
    Ok(out)
}

pub fn parse_config(text: &str) -> Result<ExperimentSpec, ExperimentError> {
    ConfigDocument::parse(text)?.into_spec()
}

impl ExperimentSpec {
    /// Fully explicit document that parses back to `self`.
    pub fn to_document(&self) -> ConfigDocument {
        let d = self.sim.dims;
        ConfigDocument {
            tx_antennas: Some(d.tx_antennas),
            rx_antennas: Some(d.rx_antennas),
            users: Some(d.users),
            streams: Some(d.streams),
            snr_grid_db: Some(self.sim.snr_grid_db.clone()),
            schemes: Some(SchemeList::Many(
                self.sim.schemes.iter().map(|s| s.as_str().to_string()).collect(),
            )),
            max_trials: Some(self.sim.max_trials),
            min_bit_errors: Some(self.sim.min_bit_errors),
            seed: Some(self.sim.master_seed),
            stop_below_ber: self.sim.stop_below_ber,
            output_path: Some(self.output_path.clone()),
            output_format: Some(self.output_format.extension().to_string()),
            report_margins: Some(self.report_margins),
            ..ConfigDocument::default()
        }
    }

    /// TOML rendering of [`Self::to_document`]; JSON when a value does not fit TOML (seeds ≥ 2⁶³).
    pub fn emit(&self) -> String {
        let doc = self.to_document();
        toml::to_string(&doc)
            .unwrap_or_else(|_| serde_json::to_string_pretty(&doc).expect("config documents always serialize to JSON"))
    }
}

/// One output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub snr_db: f64,
    pub scheme: Scheme,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub sum_rate_mean: f64,
    pub sum_rate_stderr: f64,
}

impl From<&BerPoint> for ResultRow {
    fn from(p: &BerPoint) -> Self {
        Self {
            snr_db: p.snr_db,
            scheme: p.scheme,
            bits: p.bits_simulated,
            bit_errors: p.bit_errors,
            ber: p.ber,
            sum_rate_mean: p.sum_rate_mean,
            sum_rate_stderr: p.sum_rate_stderr,
        }
    }
}

/// Mean exact-SINR margins of one stream pair at one SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginRow {
    pub snr_db: f64,
    /// 1-based stream indices, `stream_l > stream_m`.
    pub stream_l: usize,
    pub stream_m: usize,
    pub delta_db: f64,
    pub delta_balanced_db: f64,
    pub samples: u64,
}

pub fn render_results(points: &[BerPoint], format: OutputFormat) -> String {
    let rows: Vec<ResultRow> = points.iter().map(ResultRow::from).collect();
    match format {
        OutputFormat::Csv => {
            let mut out = String::from(CSV_HEADER);
            out.push('\n');
            for r in &rows {
                out.push_str(&format!(
                    "{},{},{},{},{:e},{},{}\n",
                    r.snr_db, r.scheme, r.bits, r.bit_errors, r.ber, r.sum_rate_mean, r.sum_rate_stderr
                ));
            }
            out
        }
        OutputFormat::Json => serde_json::to_string_pretty(&rows).expect("rows serialize") + "\n",
    }
}

pub fn render_margins(rows: &[MarginRow], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from(MARGIN_CSV_HEADER);
            out.push('\n');
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{}\n",
                    r.snr_db, r.stream_l, r.stream_m, r.delta_db, r.delta_balanced_db, r.samples
                ));
            }
            out
        }
        OutputFormat::Json => serde_json::to_string_pretty(rows).expect("rows serialize") + "\n",
    }
}

/// Write via a temporary file in the target directory, then rename over `path`.
pub fn write_atomically(path: &Path, contents: &str) -> Result<(), ExperimentError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| ExperimentError::io(path, e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| ExperimentError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| ExperimentError::io(path, e))?;
    tmp.persist(path).map_err(|e| ExperimentError::io(path, e.error))?;
    Ok(())
}

/// `results.csv` → `results_margins.csv`.
pub fn margins_path(output_path: &Path, format: OutputFormat) -> PathBuf {
    let stem = output_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| DEFAULT_OUTPUT_STEM.to_string());
    output_path.with_file_name(format!("{stem}_margins.{}", format.extension()))
}

/// Mean stream margins from exact SINRs over `realizations` channel draws per SNR.
///
/// Draw `r` uses the channel of trial `r`, so the report describes the same
/// realizations the sweep starts from.
pub fn margin_report(cfg: &SimConfig, realizations: u64) -> Result<Vec<MarginRow>, ExperimentError> {
    let dims = cfg.dims;
    let l = dims.streams;
    let mut rows = Vec::new();
    for &snr in &cfg.snr_grid_db {
        let sigma2 = noise_variance_for_snr(l, snr);
        let mut sums = vec![vec![(0.0f64, 0.0f64); l]; l];
        let mut samples = 0u64;
        for r in 0..realizations {
            let cs = draw_channel_set_for_trial::<f64>(dims, sigma2, cfg.master_seed, r).map_err(SimError::from)?;
            let original = all_precoders(&cs, Scheme::Original).map_err(SimError::from)?;
            let proposed = all_precoders(&cs, Scheme::Proposed).map_err(SimError::from)?;
            for k in 0..dims.users {
                let d = stream_margins_db(&exact_stream_sinr(&cs, &original, k).map_err(SimError::from)?)
                    .map_err(SimError::from)?;
                let d_bal = stream_margins_db(&exact_stream_sinr(&cs, &proposed, k).map_err(SimError::from)?)
                    .map_err(SimError::from)?;
                for (hi, lo) in d.pairs() {
                    sums[hi][lo].0 += d.get(hi, lo);
                    sums[hi][lo].1 += d_bal.get(hi, lo);
                }
                samples += 1;
            }
        }
        for hi in 1..l {
            for lo in 0..hi {
                let (a, b) = sums[hi][lo];
                rows.push(MarginRow {
                    snr_db: snr,
                    stream_l: hi + 1,
                    stream_m: lo + 1,
                    delta_db: a / samples as f64,
                    delta_balanced_db: b / samples as f64,
                    samples,
                });
            }
        }
    }
    Ok(rows)
}

/// SNR needed by each scheme at [`GAIN_TARGET_BER`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSummary {
    pub original_db: f64,
    pub proposed_db: f64,
}

impl GainSummary {
    /// Positive when the balanced precoder needs less SNR.
    pub fn gain_db(&self) -> f64 {
        self.original_db - self.proposed_db
    }
}

impl fmt::Display for GainSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "SNR at BER {GAIN_TARGET_BER:e}: original {:.2} dB, proposed {:.2} dB, gain {:.2} dB",
            self.original_db,
            self.proposed_db,
            self.gain_db()
        )
    }
}

pub fn gain_at_target(points: &[BerPoint]) -> Option<GainSummary> {
    let original = interpolate_snr_at_ber(&scheme_curve(points, Scheme::Original), GAIN_TARGET_BER).ok()?;
    let proposed = interpolate_snr_at_ber(&scheme_curve(points, Scheme::Proposed), GAIN_TARGET_BER).ok()?;
    Some(GainSummary {
        original_db: original,
        proposed_db: proposed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub points: Vec<BerPoint>,
    pub gain: Option<GainSummary>,
    pub margins: Option<Vec<MarginRow>>,
}

/// Run the sweep on `workers` threads (`None`: rayon's default), write the result
/// files and print a short summary to `log`.
pub fn run_experiment(
    spec: &ExperimentSpec,
    workers: Option<usize>,
    log: &mut dyn Write,
) -> Result<RunSummary, ExperimentError> {
    spec.sim.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| ExperimentError::Numerical(format!("cannot start worker pool: {e}")))?;
    let points = pool.install(|| run_sweep::<f64>(&spec.sim))?;
    let margins = if spec.report_margins {
        Some(pool.install(|| margin_report(&spec.sim, MARGIN_REALIZATIONS))?)
    } else {
        None
    };

    write_atomically(&spec.output_path, &render_results(&points, spec.output_format))?;
    if let Some(rows) = &margins {
        write_atomically(
            &margins_path(&spec.output_path, spec.output_format),
            &render_margins(rows, spec.output_format),
        )?;
    }

    let log_err = |e| ExperimentError::io(Path::new("<log>"), e);
    for p in &points {
        writeln!(
            log,
            "{:>6.1} dB {:<9} ber={:.3e} errors={:<6} trials={:<8}{}",
            p.snr_db,
            p.scheme.as_str(),
            p.ber,
            p.bit_errors,
            p.trials,
            if p.resolved { "" } else { " (trial cap reached)" }
        )
        .map_err(log_err)?;
    }
    for &scheme in &spec.sim.schemes {
        if !is_monotone_decreasing(&scheme_curve(&points, scheme), 3.0) {
            writeln!(log, "warning: {scheme} BER is not monotone in SNR within 3 sigma").map_err(log_err)?;
        }
    }
    let gain = gain_at_target(&points);
    match &gain {
        Some(g) => writeln!(log, "{g}"),
        None if spec.sim.schemes.len() == 2 => {
            writeln!(
                log,
                "BER {GAIN_TARGET_BER:e} is not bracketed by both curves; no gain reported"
            )
        }
        None => Ok(()),
    }
    .map_err(log_err)?;
    writeln!(log, "wrote {}", spec.output_path.display()).map_err(log_err)?;
    Ok(RunSummary { points, gain, margins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn empty_document_gives_defaults() {
        let spec = parse_config("").unwrap();
        assert_eq!(spec.sim.dims, SystemDims::new(8, 3, 2, 2).unwrap());
        assert_eq!(spec.sim.snr_grid_db.len(), 13);
        assert_eq!(spec.sim.snr_grid_db[12], 24.0);
        assert_eq!(spec.sim.min_bit_errors, 200);
        assert_eq!(spec.sim.master_seed, 1);
        assert_eq!(spec.sim.schemes, Scheme::ALL.to_vec());
        assert_eq!(spec.output_format, OutputFormat::Csv);
        assert_eq!(spec, parse_config("{}").unwrap());
    }

    #[test]
    fn aliases_and_range_keys() {
        let spec = parse_config(
            "N = 6\nM = 2\nK = 3\nL = 1\nsnr_start = 5\nsnr_stop = 9\nsnr_step = 2\nschemes = \"proposed\"\n",
        )
        .unwrap();
        assert_eq!(spec.sim.dims, SystemDims::new(6, 2, 3, 1).unwrap());
        assert_eq!(spec.sim.snr_grid_db, vec![5.0, 7.0, 9.0]);
        assert_eq!(spec.sim.schemes, vec![Scheme::Proposed]);
        let json = parse_config(r#"{"L": 3, "snr_grid_db": [1.5, 3], "format": "json"}"#).unwrap();
        assert_eq!(json.sim.dims.streams, 3);
        assert_eq!(json.sim.snr_grid_db, vec![1.5, 3.0]);
        assert_eq!(json.output_path, PathBuf::from("ber_results.json"));
    }

    #[test]
    fn too_many_streams_is_a_validation_error() {
        let err = parse_config("L = 5\nM = 3\n").unwrap_err();
        assert!(matches!(err, ExperimentError::Validation(_)));
        assert!(err.to_string().contains("L ≤ M"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_config("N = 8\nM = \"three\"\n").unwrap_err();
        assert!(matches!(err, ExperimentError::Parse { line: Some(2), .. }), "{err}");
        let err = parse_config("N = 8\n\nbogus_key = 1\n").unwrap_err();
        assert!(matches!(err, ExperimentError::Parse { line: Some(3), .. }), "{err}");
        assert!(err.to_string().contains("bogus_key"));
        let err = parse_config("{\n \"N\": 8,\n \"M\": }").unwrap_err();
        assert!(matches!(err, ExperimentError::Parse { line: Some(3), .. }), "{err}");
        assert!(parse_config("snr_grid_db = [0.0]\nsnr_step = 1\n").is_err());
    }

    #[test]
    fn emit_then_parse_round_trips() {
        let spec = parse_config("L = 3\nsnr_start = -3\nsnr_stop = 0.3\nsnr_step = 0.1\nseed = 77\nstop_below_ber = 1e-5\nreport_margins = true\n")
            .unwrap();
        assert_eq!(parse_config(&spec.emit()).unwrap(), spec);
        let mut big = spec.clone();
        big.sim.master_seed = u64::MAX;
        assert_eq!(parse_config(&big.emit()).unwrap(), big);
    }

    #[test]
    fn snr_range_is_inclusive() {
        assert_eq!(snr_range(0.0, 24.0, 2.0).unwrap().len(), 13);
        assert_eq!(snr_range(0.0, 0.3, 0.1).unwrap().len(), 4);
        assert!(snr_range(1.0, 0.0, 1.0).is_err());
        assert!(snr_range(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn csv_rendering_matches_header() {
        let points = vec![BerPoint {
            snr_db: 2.0,
            scheme: Scheme::Proposed,
            bit_errors: 3,
            bits_simulated: 1000,
            ber: 3e-3,
            sum_rate_mean: 4.5,
            sum_rate_stderr: 0.25,
            trials: 125,
            user_bit_errors: vec![1, 2],
            resolved: false,
        }];
        assert_eq!(
            render_results(&points, OutputFormat::Csv),
            format!("{CSV_HEADER}\n2,proposed,1000,3,3e-3,4.5,0.25\n")
        );
        let rows: Vec<ResultRow> = serde_json::from_str(&render_results(&points, OutputFormat::Json)).unwrap();
        assert_eq!(rows, vec![ResultRow::from(&points[0])]);
    }

    #[test]
    fn margins_path_sits_next_to_results() {
        assert_eq!(
            margins_path(Path::new("out/run.csv"), OutputFormat::Csv),
            PathBuf::from("out/run_margins.csv")
        );
    }

    #[test]
    fn failed_write_leaves_no_file() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("missing").join("x.csv");
        let err = write_atomically(&target, "a").unwrap_err();
        assert_eq!(err.exit_code(), 3);
        assert!(!target.exists());
        let ok = dir.path().join("x.csv");
        write_atomically(&ok, "a,b\n").unwrap();
        assert_eq!(fs::read_to_string(&ok).unwrap(), "a,b\n");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
