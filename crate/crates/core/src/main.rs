use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use leakage_beam::experiment::{run_experiment, ConfigDocument, ExperimentError, SchemeList};
use leakage_beam::properties::{run_property_suite, DEFAULT_INSTANCES};

const THREADS_ENV: &str = "LEAKAGE_BEAM_THREADS";

const AFTER_HELP: &str = "\
Defaults: N=8, M=3, K=2, L=2, SNR 0..24 dB step 2, min 200 bit errors per point,
at most 200000 trials per point, seed 1, both schemes, CSV to ber_results.csv.
Command-line flags override values from --config.

Set LEAKAGE_BEAM_THREADS to choose the worker count; results do not depend on it.

Exit status: 0 success, 1 numerical failure, 2 config error, 3 I/O error.";

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemesArg {
    Original,
    Proposed,
    Both,
}

/// BER and sum-rate sweeps for SLNR precoders in downlink multi-user MIMO.
#[derive(Debug, Parser)]
#[command(name = "leakage-beam", version, about, after_help = AFTER_HELP)]
struct Cli {
    /// TOML or JSON experiment config.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Result file.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// First SNR point in dB.
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    snr_start: Option<f64>,
    /// Last SNR point in dB (inclusive).
    #[arg(long, value_name = "DB", allow_negative_numbers = true)]
    snr_stop: Option<f64>,
    #[arg(long, value_name = "DB")]
    snr_step: Option<f64>,
    /// Streams per user (L).
    #[arg(long, value_name = "L")]
    streams: Option<usize>,
    /// Number of users (K).
    #[arg(long, value_name = "K")]
    users: Option<usize>,
    /// Transmit antennas (N).
    #[arg(long, value_name = "N")]
    tx_antennas: Option<usize>,
    /// Receive antennas per user (M).
    #[arg(long, value_name = "M")]
    rx_antennas: Option<usize>,
    #[arg(long, value_enum)]
    schemes: Option<SchemesArg>,
    /// Bit errors to collect per point before stopping.
    #[arg(long, value_name = "COUNT")]
    min_errors: Option<u64>,
    /// Trial cap per point.
    #[arg(long, value_name = "COUNT")]
    max_trials: Option<u64>,
    /// Drop a scheme from the remaining grid once its BER falls below this value.
    #[arg(long, value_name = "BER")]
    stop_below_ber: Option<f64>,
    /// Run the invariant suite on 200 random instances instead of a sweep.
    #[arg(long)]
    check_properties: bool,
    /// Also write mean per-stream SINR margins next to the results.
    #[arg(long)]
    report_margins: bool,
}

impl Cli {
    fn apply(&self, doc: &mut ConfigDocument) {
        if self.snr_start.is_some() || self.snr_stop.is_some() || self.snr_step.is_some() {
            doc.snr_grid_db = None;
        }
        let set = |slot: &mut Option<f64>, v: Option<f64>| {
            if v.is_some() {
                *slot = v;
            }
        };
        set(&mut doc.snr_start_db, self.snr_start);
        set(&mut doc.snr_stop_db, self.snr_stop);
        set(&mut doc.snr_step_db, self.snr_step);
        set(&mut doc.stop_below_ber, self.stop_below_ber);
        doc.tx_antennas = self.tx_antennas.or(doc.tx_antennas);
        doc.rx_antennas = self.rx_antennas.or(doc.rx_antennas);
        doc.users = self.users.or(doc.users);
        doc.streams = self.streams.or(doc.streams);
        doc.seed = self.seed.or(doc.seed);
        doc.min_bit_errors = self.min_errors.or(doc.min_bit_errors);
        doc.max_trials = self.max_trials.or(doc.max_trials);
        if let Some(s) = self.schemes {
            let name = match s {
                SchemesArg::Original => "original",
                SchemesArg::Proposed => "proposed",
                SchemesArg::Both => "both",
            };
            doc.schemes = Some(SchemeList::One(name.into()));
        }
        if let Some(f) = self.format {
            doc.output_format = Some(
                match f {
                    FormatArg::Csv => "csv",
                    FormatArg::Json => "json",
                }
                .into(),
            );
        }
        if let Some(out) = &self.out {
            doc.output_path = Some(out.clone());
        }
        if self.report_margins {
            doc.report_margins = Some(true);
        }
    }
}

fn worker_count() -> Result<Option<usize>, ExperimentError> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(ExperimentError::Validation(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn run(cli: &Cli) -> Result<(), ExperimentError> {
    let mut doc = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
                path: path.clone(),
                source,
            })?;
            ConfigDocument::parse(&text)?
        }
        None => ConfigDocument::default(),
    };
    cli.apply(&mut doc);
    let spec = doc.into_spec()?;
    let workers = worker_count()?;

    if cli.check_properties {
        let report = run_property_suite(spec.sim.master_seed, DEFAULT_INSTANCES);
        print!("{report}");
        if !report.all_passed() {
            return Err(ExperimentError::Numerical("invariant suite reported failures".into()));
        }
        return Ok(());
    }

    run_experiment(&spec, workers, &mut io::stdout().lock())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
