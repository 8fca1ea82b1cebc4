//! SNR sweeps of the block-fading mutual information and its baselines,
//! written as CSV or JSON one row at a time.

pub mod spec;

use std::io::{self, Write};

use bfmi_core::density::DensityEvaluator;
use bfmi_core::{
    derive_seed, high_snr_slope_capacity, high_snr_slope_pilot, mi_lower_bound, mutual_information_with,
    perfect_csi_capacity, pilot_se_boosted, pilot_se_uniform, snr_db_to_linear, ChannelConfig,
};
use serde::Serialize;

pub use spec::{parse_spec, parse_baselines, Baseline, Format, SnrGrid, SweepSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Clap(clap::Error),
    #[error("usage: {0}")]
    Usage(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) => e.exit_code(),
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// One sweep point. `None` fields are written empty (CSV) or `null` (JSON).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub mi_bits: f64,
    pub mi_stderr: f64,
    pub n_samples: u64,
    pub cond_entropy_bits: f64,
    pub out_entropy_bits: f64,
    pub capacity_csi_bits: Option<f64>,
    pub pilot_uniform_bits: Option<f64>,
    pub pilot_uniform_np: Option<usize>,
    pub pilot_boost_bits: Option<f64>,
    pub lower_bound_bits: Option<f64>,
    pub ebn0_db: Option<f64>,
    pub degenerate_resample_count: u64,
}

pub const COLUMNS: [&str; 13] = [
    "snr_db",
    "mi_bits",
    "mi_stderr",
    "n_samples",
    "cond_entropy_bits",
    "out_entropy_bits",
    "capacity_csi_bits",
    "pilot_uniform_bits",
    "pilot_uniform_np",
    "pilot_boost_bits",
    "lower_bound_bits",
    "ebn0_db",
    "degenerate_resample_count",
];

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt_float(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

impl SweepRow {
    fn csv_fields(&self) -> Vec<String> {
        vec![
            float(self.snr_db),
            float(self.mi_bits),
            float(self.mi_stderr),
            self.n_samples.to_string(),
            float(self.cond_entropy_bits),
            float(self.out_entropy_bits),
            opt_float(self.capacity_csi_bits),
            opt_float(self.pilot_uniform_bits),
            self.pilot_uniform_np.map(|n| n.to_string()).unwrap_or_default(),
            opt_float(self.pilot_boost_bits),
            opt_float(self.lower_bound_bits),
            opt_float(self.ebn0_db),
            self.degenerate_resample_count.to_string(),
        ]
    }
}

/// Spec echo written ahead of the rows.
#[derive(Debug, Serialize)]
struct Header<'a> {
    version: &'static str,
    #[serde(flatten)]
    spec: &'a SweepSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    slopes: Option<Slopes>,
}

#[derive(Debug, Serialize)]
struct Slopes {
    capacity: f64,
    pilot: f64,
}

enum Sink<W: Write> {
    Csv(csv::Writer<W>),
    Json { out: W, first: bool },
}

impl<W: Write> Sink<W> {
    fn open(format: Format, mut out: W, header: &Header<'_>) -> Result<Self, CliError> {
        let echo = serde_json::to_string(header).map_err(|e| CliError::Io(e.to_string()))?;
        match format {
            Format::Csv => {
                writeln!(out, "# bfmi {VERSION}")?;
                writeln!(out, "# spec: {echo}")?;
                let mut w = csv::WriterBuilder::new().from_writer(out);
                w.write_record(COLUMNS).map_err(csv_err)?;
                w.flush()?;
                Ok(Sink::Csv(w))
            }
            Format::Json => {
                write!(out, "{{\"spec\":{echo},\"rows\":[")?;
                out.flush()?;
                Ok(Sink::Json { out, first: true })
            }
        }
    }

    fn row(&mut self, row: &SweepRow) -> Result<(), CliError> {
        match self {
            Sink::Csv(w) => {
                w.write_record(row.csv_fields()).map_err(csv_err)?;
                w.flush()?;
            }
            Sink::Json { out, first } => {
                if !*first {
                    write!(out, ",")?;
                }
                *first = false;
                let text = serde_json::to_string(row).map_err(|e| CliError::Io(e.to_string()))?;
                write!(out, "\n{text}")?;
                out.flush()?;
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        match self {
            Sink::Csv(mut w) => w.flush()?,
            Sink::Json { mut out, .. } => {
                writeln!(out, "\n]}}")?;
                out.flush()?;
            }
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn numerical(snr_db: f64, e: bfmi_core::Error) -> CliError {
    CliError::Numerical(format!("at snr = {snr_db} dB: {e}"))
}

/// Computes one row; warnings go to `diag`.
pub fn sweep_point(spec: &SweepSpec, index: usize, snr_db: f64, diag: &mut dyn Write) -> Result<SweepRow, CliError> {
    let snr = snr_db_to_linear(snr_db);
    let config = ChannelConfig::short_block(spec.nt, spec.nr, spec.nb, snr)
        .map_err(|e| CliError::Usage(format!("at snr = {snr_db} dB: {e}")))?;
    let mut eval = DensityEvaluator::new(config);
    if spec.grid_accel {
        let x_max = 4.0 * spec.nb as f64 * (1.0 + snr);
        eval = eval.build_grid(x_max, 4096).map_err(|e| numerical(snr_db, e))?;
    }
    let rule = spec.rule()?;
    let est = mutual_information_with(&eval, &rule, derive_seed(spec.seed, index as u64), spec.workers)
        .map_err(|e| numerical(snr_db, e))?;
    if est.reached_max_samples {
        writeln!(
            diag,
            "warning: snr = {snr_db} dB stopped at max-samples = {} before reaching the CI target",
            spec.max_samples
        )?;
    }

    let capacity = if spec.wants(Baseline::Capacity) {
        Some(perfect_csi_capacity(&config).map_err(|e| numerical(snr_db, e))?)
    } else {
        None
    };
    let (pilot_uniform_bits, pilot_uniform_np) = if spec.wants(Baseline::PilotUniform) {
        match pilot_se_uniform(&config) {
            Ok(r) => (Some(r.se_bits), Some(r.n_p)),
            Err(e) => {
                writeln!(diag, "warning: snr = {snr_db} dB: pilot_uniform unavailable: {e}")?;
                (None, None)
            }
        }
    } else {
        (None, None)
    };
    let pilot_boost_bits = if spec.wants(Baseline::PilotBoost) {
        match pilot_se_boosted(&config) {
            Ok(r) => Some(r.se_bits),
            Err(e) => {
                writeln!(diag, "warning: snr = {snr_db} dB: pilot_boost unavailable: {e}")?;
                None
            }
        }
    } else {
        None
    };
    let lower_bound_bits = if spec.wants(Baseline::LowerBound) {
        Some(mi_lower_bound(&config).map_err(|e| numerical(snr_db, e))?)
    } else {
        None
    };
    Ok(SweepRow {
        snr_db,
        mi_bits: est.mi_bits,
        mi_stderr: est.stderr_bits,
        n_samples: est.n_samples,
        cond_entropy_bits: est.cond_entropy_bits,
        out_entropy_bits: est.out_entropy_bits,
        capacity_csi_bits: capacity,
        pilot_uniform_bits,
        pilot_uniform_np,
        pilot_boost_bits,
        lower_bound_bits,
        ebn0_db: (est.mi_bits > 0.0).then(|| 10.0 * (snr / est.mi_bits).log10()),
        degenerate_resample_count: est.degenerate_resamples,
    })
}

/// Runs every grid point in ascending SNR, writing and flushing each row as
/// it completes. Returns the rows written.
pub fn run_sweep<W: Write>(spec: &SweepSpec, out: W, diag: &mut dyn Write) -> Result<Vec<SweepRow>, CliError> {
    let slopes = spec.wants(Baseline::Slopes).then(|| {
        let c = ChannelConfig::short_block(spec.nt, spec.nr, spec.nb, 1.0).expect("validated by parse_spec");
        Slopes {
            capacity: high_snr_slope_capacity(&c),
            pilot: high_snr_slope_pilot(&c),
        }
    });
    let header = Header {
        version: VERSION,
        spec,
        slopes,
    };
    let mut sink = Sink::open(spec.format, out, &header)?;
    let mut rows = Vec::with_capacity(spec.snr_db.len());
    for (i, snr_db) in spec.snr_db.points().into_iter().enumerate() {
        let row = sweep_point(spec, i, snr_db, diag)?;
        sink.row(&row)?;
        rows.push(row);
    }
    sink.finish()?;
    Ok(rows)
}

/// Runs a spec against its configured output (file or standard output).
pub fn run_to_destination(spec: &SweepSpec, diag: &mut dyn Write) -> Result<Vec<SweepRow>, CliError> {
    match &spec.output {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::Io(format!("creating {}: {e}", path.display())))?;
            run_sweep(spec, io::BufWriter::new(file), diag)
        }
        None => run_sweep(spec, io::stdout().lock(), diag),
    }
}
