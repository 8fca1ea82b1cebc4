//! Sweep specification: flags, optional TOML file, defaults.

use std::ffi::OsString;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use bfmi_core::StoppingRule;
use clap::Parser;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    Capacity,
    PilotUniform,
    PilotBoost,
    LowerBound,
    Slopes,
}

impl Baseline {
    pub const ALL: [Baseline; 5] = [
        Baseline::Capacity,
        Baseline::PilotUniform,
        Baseline::PilotBoost,
        Baseline::LowerBound,
        Baseline::Slopes,
    ];

    fn name(self) -> &'static str {
        match self {
            Baseline::Capacity => "capacity",
            Baseline::PilotUniform => "pilot_uniform",
            Baseline::PilotBoost => "pilot_boost",
            Baseline::LowerBound => "lower_bound",
            Baseline::Slopes => "slopes",
        }
    }
}

/// Parses `all`, `none` or a comma-separated list of baseline names.
pub fn parse_baselines(s: &str) -> Result<Vec<Baseline>, String> {
    match s.trim() {
        "all" => return Ok(Baseline::ALL.to_vec()),
        "none" | "" => return Ok(Vec::new()),
        _ => {}
    }
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim) {
        let b = Baseline::ALL
            .into_iter()
            .find(|b| b.name() == item || b.name().replace('_', "-") == item)
            .ok_or_else(|| {
                format!(
                    "unknown baseline '{item}' (expected all, none or a list of capacity, pilot_uniform, pilot_boost, lower_bound, slopes)"
                )
            })?;
        if !out.contains(&b) {
            out.push(b);
        }
    }
    out.sort();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format '{s}' (expected csv or json)")),
        }
    }
}

/// `START:STOP:STEP` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrGrid {
    pub start_db: f64,
    pub stop_db: f64,
    pub step_db: f64,
}

impl SnrGrid {
    pub fn new(start_db: f64, stop_db: f64, step_db: f64) -> Result<Self, String> {
        if !(start_db.is_finite() && stop_db.is_finite() && step_db.is_finite()) {
            return Err("grid bounds must be finite".into());
        }
        if step_db <= 0.0 {
            return Err(format!("step must be positive, got {step_db}"));
        }
        if start_db > stop_db {
            return Err(format!("start {start_db} exceeds stop {stop_db}"));
        }
        Ok(Self {
            start_db,
            stop_db,
            step_db,
        })
    }

    pub fn len(&self) -> usize {
        ((self.stop_db - self.start_db) / self.step_db + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.start_db + i as f64 * self.step_db)
            .collect()
    }
}

impl FromStr for SnrGrid {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected START:STOP:STEP, got '{s}'"));
        }
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("'{p}' is not a number in '{s}'"))
        };
        Self::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }
}

impl fmt::Display for SnrGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start_db, self.stop_db, self.step_db)
    }
}

/// Fully resolved sweep; serialized verbatim into output headers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub nt: usize,
    pub nr: usize,
    pub nb: usize,
    pub snr_db: SnrGrid,
    pub ci_halfwidth: f64,
    pub confidence: f64,
    pub min_samples: u64,
    pub max_samples: u64,
    pub seed: u64,
    pub workers: usize,
    pub baselines: Vec<Baseline>,
    pub grid_accel: bool,
    pub format: Format,
    /// Not echoed, so identical sweeps written to different paths match.
    #[serde(skip)]
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    pub fn rule(&self) -> Result<StoppingRule, CliError> {
        StoppingRule::new(self.confidence, self.ci_halfwidth, self.min_samples, self.max_samples)
            .map_err(|e| CliError::Usage(format!("stopping rule: {e}")))
    }

    pub fn wants(&self, b: Baseline) -> bool {
        self.baselines.contains(&b)
    }
}

#[derive(Debug, Parser)]
#[command(name = "bfmi", version, about = "SNR sweeps of noncoherent block-fading MIMO mutual information")]
struct Flags {
    /// Transmit antennas.
    #[arg(long)]
    nt: Option<usize>,
    /// Receive antennas (at most nt).
    #[arg(long)]
    nr: Option<usize>,
    /// Coherence blocklength in symbols.
    #[arg(long)]
    nb: Option<usize>,
    /// SNR grid START:STOP:STEP in dB.
    #[arg(long = "snr-db", value_name = "START:STOP:STEP", allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// Target CI halfwidth, bits/s/Hz.
    #[arg(long = "ci-halfwidth")]
    ci_halfwidth: Option<f64>,
    /// Two-sided CI confidence level.
    #[arg(long)]
    confidence: Option<f64>,
    #[arg(long = "min-samples")]
    min_samples: Option<u64>,
    #[arg(long = "max-samples")]
    max_samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte-Carlo worker threads.
    #[arg(long)]
    workers: Option<usize>,
    /// all, none, or a comma list of capacity,pilot_uniform,pilot_boost,lower_bound,slopes.
    #[arg(long)]
    baselines: Option<String>,
    /// Tabulate the density kernels before sampling.
    #[arg(long = "grid-accel")]
    grid_accel: bool,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// TOML file with the same keys as the flags; flags win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    nt: Option<usize>,
    nr: Option<usize>,
    nb: Option<usize>,
    snr_db: Option<String>,
    ci_halfwidth: Option<f64>,
    confidence: Option<f64>,
    min_samples: Option<u64>,
    max_samples: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
    baselines: Option<toml::Value>,
    grid_accel: Option<bool>,
    format: Option<String>,
    output: Option<PathBuf>,
}

pub const DEFAULT_SEED: u64 = 20_240_101;

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn usage(flag: &str, msg: impl fmt::Display) -> CliError {
    CliError::Usage(format!("--{flag}: {msg}"))
}

/// Resolves flags over the optional config file over defaults.
pub fn parse_spec<I, T>(argv: I) -> Result<SweepSpec, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let flags = Flags::try_parse_from(argv).map_err(CliError::Clap)?;
    let file = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Io(format!("reading {}: {e}", path.display())))?;
            toml::from_str::<FileConfig>(&text)
                .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };

    let require = |flag: &str, v: Option<usize>| v.ok_or_else(|| usage(flag, "required (flag or config file)"));
    let nt = require("nt", flags.nt.or(file.nt))?;
    let nr = require("nr", flags.nr.or(file.nr))?;
    let nb = require("nb", flags.nb.or(file.nb))?;
    let grid_text = flags
        .snr_db
        .or(file.snr_db)
        .ok_or_else(|| usage("snr-db", "required (flag or config file)"))?;
    let snr_db = grid_text.parse::<SnrGrid>().map_err(|e| usage("snr-db", e))?;

    let baselines = match (flags.baselines, file.baselines) {
        (Some(s), _) => parse_baselines(&s).map_err(|e| usage("baselines", e))?,
        (None, Some(toml::Value::String(s))) => parse_baselines(&s).map_err(|e| usage("baselines", e))?,
        (None, Some(toml::Value::Array(items))) => {
            let names: Result<Vec<String>, _> = items
                .into_iter()
                .map(|v| v.as_str().map(str::to_owned).ok_or("baseline entries must be strings"))
                .collect();
            parse_baselines(&names.map_err(|e| usage("baselines", e))?.join(",")).map_err(|e| usage("baselines", e))?
        }
        (None, Some(_)) => return Err(usage("baselines", "expected a string or list of strings")),
        (None, None) => Baseline::ALL.to_vec(),
    };
    let format = match flags.format.or(file.format) {
        Some(s) => s.parse().map_err(|e| usage("format", e))?,
        None => Format::Csv,
    };
    let defaults = StoppingRule::default();
    let workers = flags.workers.or(file.workers).unwrap_or_else(default_workers);
    if workers == 0 {
        return Err(usage("workers", "must be at least 1"));
    }
    let spec = SweepSpec {
        nt,
        nr,
        nb,
        snr_db,
        ci_halfwidth: flags.ci_halfwidth.or(file.ci_halfwidth).unwrap_or(defaults.halfwidth()),
        confidence: flags.confidence.or(file.confidence).unwrap_or(defaults.confidence()),
        min_samples: flags.min_samples.or(file.min_samples).unwrap_or(defaults.min_samples()),
        max_samples: flags.max_samples.or(file.max_samples).unwrap_or(defaults.max_samples()),
        seed: flags.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        workers,
        baselines,
        grid_accel: flags.grid_accel || file.grid_accel.unwrap_or(false),
        format,
        output: flags.output.or(file.output),
    };
    spec.rule()?;
    bfmi_core::ChannelConfig::short_block(nt, nr, nb, 1.0).map_err(|e| CliError::Usage(format!("--nt/--nr/--nb: {e}")))?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn argv(s: &str) -> Vec<String> {
        std::iter::once("bfmi".to_string())
            .chain(s.split_whitespace().map(str::to_owned))
            .collect()
    }

    #[test]
    fn grid_parsing() {
        let g: SnrGrid = "0:20:1".parse().unwrap();
        assert_eq!(g.len(), 21);
        let g: SnrGrid = "0:20:5".parse().unwrap();
        assert_eq!(g.points(), vec![0.0, 5.0, 10.0, 15.0, 20.0]);
        let g: SnrGrid = "-10:-10:1".parse().unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!("0:1:0.1".parse::<SnrGrid>().unwrap().len(), 11);
        for bad in ["0:20", "0:20:-1", "0:20:0", "20:0:1", "a:1:1", "0:1:nan"] {
            assert!(bad.parse::<SnrGrid>().is_err(), "{bad}");
        }
    }

    #[test]
    fn flags_resolve() {
        let s = parse_spec(argv("--nt 2 --nr 2 --nb 10 --snr-db 0:20:1")).unwrap();
        assert_eq!((s.nt, s.nr, s.nb, s.snr_db.len()), (2, 2, 10, 21));
        assert_eq!(s.baselines, Baseline::ALL.to_vec());
        assert_eq!(s.format, Format::Csv);
        let s = parse_spec(argv("--nt 1 --nr 1 --nb 4 --snr-db -10:0:5 --ci-halfwidth 0.005 --confidence 0.90")).unwrap();
        let r = s.rule().unwrap();
        assert_eq!((r.halfwidth(), r.confidence()), (0.005, 0.9));
        assert_eq!(s.snr_db.start_db, -10.0);
    }

    #[test]
    fn usage_errors_name_the_flag() {
        let err = parse_spec(argv("--nt 1 --nr 1 --nb 4 --snr-db 0:10:-1")).unwrap_err();
        assert!(matches!(&err, CliError::Usage(m) if m.contains("--snr-db")), "{err}");
        assert_eq!(err.exit_code(), 2);
        let err = parse_spec(argv("--nt 1 --nr 1 --nb 4 --snr-db 0:10:1 --baselines capacity,bogus")).unwrap_err();
        assert!(matches!(&err, CliError::Usage(m) if m.contains("--baselines")));
        assert!(parse_spec(argv("--nt 1 --nr 1 --nb 4 --snr-db 0:10:1 --bogus 3")).is_err());
        assert!(parse_spec(argv("--nt 1 --nr 2 --nb 4 --snr-db 0:10:1")).is_err());
        assert!(parse_spec(argv("--nr 1 --nb 4 --snr-db 0:10:1")).is_err());
        assert!(parse_spec(argv("--nt 1 --nr 1 --nb 4 --snr-db 0:10:1 --confidence 1.5")).is_err());
    }

    #[test]
    fn flags_override_config_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "nt = 1\nnr = 1\nnb = 4\nsnr-db = \"0:10:5\"\nseed = 9\nbaselines = [\"capacity\"]").unwrap();
        let path = f.path().to_str().unwrap().to_owned();
        let s = parse_spec(argv(&format!("--config {path} --nb 10"))).unwrap();
        assert_eq!(s.nb, 10);
        assert_eq!(s.seed, 9);
        assert_eq!(s.baselines, vec![Baseline::Capacity]);

        let mut bad = tempfile::NamedTempFile::new().unwrap();
        writeln!(bad, "nt = 1\nunknown-key = 3").unwrap();
        let path = bad.path().to_str().unwrap().to_owned();
        assert!(matches!(parse_spec(argv(&format!("--config {path}"))), Err(CliError::Usage(_))));
    }

    #[test]
    fn baseline_lists() {
        assert_eq!(parse_baselines("none").unwrap(), vec![]);
        assert_eq!(
            parse_baselines("lower_bound, capacity,capacity").unwrap(),
            vec![Baseline::Capacity, Baseline::LowerBound]
        );
        assert_eq!(parse_baselines("pilot-boost").unwrap(), vec![Baseline::PilotBoost]);
        assert!(parse_baselines("x").is_err());
    }
}
