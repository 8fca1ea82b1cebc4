use std::process::Command;

use bfmi_cli::{parse_spec, run_sweep, CliError, COLUMNS};

fn argv(s: &str) -> Vec<String> {
    std::iter::once("bfmi".to_string())
        .chain(s.split_whitespace().map(str::to_owned))
        .collect()
}

fn csv_text(args: &str) -> (String, Vec<bfmi_cli::SweepRow>) {
    let spec = parse_spec(argv(args)).unwrap();
    let mut buf = Vec::new();
    let rows = run_sweep(&spec, &mut buf, &mut std::io::sink()).unwrap();
    (String::from_utf8(buf).unwrap(), rows)
}

const FAST: &str = "--ci-halfwidth 0.05 --workers 2";

#[test]
fn grid_rows_in_order() {
    let (_, rows) = csv_text(&format!("--nt 1 --nr 1 --nb 10 --snr-db 0:20:5 {FAST}"));
    let snrs: Vec<f64> = rows.iter().map(|r| r.snr_db).collect();
    assert_eq!(snrs, vec![0.0, 5.0, 10.0, 15.0, 20.0]);
    for r in &rows {
        assert_eq!(r.mi_bits, (r.out_entropy_bits - r.cond_entropy_bits) / 10.0);
    }
}

#[test]
fn csv_round_trips_every_field() {
    let (text, rows) = csv_text(&format!("--nt 2 --nr 1 --nb 5 --snr-db -5:5:5 {FAST}"));
    assert!(text.lines().take(2).all(|l| l.starts_with('#')));
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(str::to_owned).collect();
    assert_eq!(header, COLUMNS);
    let records: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(records.len(), rows.len());
    let opt = |s: &str| if s.is_empty() { None } else { Some(s.parse::<f64>().unwrap()) };
    for (rec, row) in records.iter().zip(&rows) {
        assert_eq!(rec[0].parse::<f64>().unwrap(), row.snr_db);
        assert_eq!(rec[1].parse::<f64>().unwrap(), row.mi_bits);
        assert_eq!(rec[2].parse::<f64>().unwrap(), row.mi_stderr);
        assert_eq!(rec[3].parse::<u64>().unwrap(), row.n_samples);
        assert_eq!(rec[4].parse::<f64>().unwrap(), row.cond_entropy_bits);
        assert_eq!(rec[5].parse::<f64>().unwrap(), row.out_entropy_bits);
        assert_eq!(opt(&rec[6]), row.capacity_csi_bits);
        assert_eq!(opt(&rec[7]), row.pilot_uniform_bits);
        assert_eq!(opt(&rec[8]).map(|v| v as usize), row.pilot_uniform_np);
        assert_eq!(opt(&rec[9]), row.pilot_boost_bits);
        assert_eq!(opt(&rec[10]), row.lower_bound_bits);
        assert_eq!(opt(&rec[11]), row.ebn0_db);
        assert_eq!(rec[12].parse::<u64>().unwrap(), row.degenerate_resample_count);
        if row.mi_bits > 0.0 {
            let want = 10.0 * (10f64.powf(row.snr_db / 10.0) / row.mi_bits).log10();
            assert_eq!(row.ebn0_db, Some(want));
        }
    }
}

#[test]
fn absent_baselines_are_empty() {
    let (text, rows) = csv_text(&format!("--nt 1 --nr 1 --nb 4 --snr-db 0:10:10 --baselines capacity {FAST}"));
    for r in &rows {
        assert!(r.capacity_csi_bits.is_some());
        assert!(r.pilot_uniform_bits.is_none() && r.pilot_boost_bits.is_none() && r.lower_bound_bits.is_none());
    }
    for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), COLUMNS.len());
        assert!(f[7].is_empty() && f[8].is_empty() && f[9].is_empty() && f[10].is_empty());
        assert!(!f[6].is_empty());
    }
}

#[test]
fn boost_column_empty_below_regime() {
    let spec = parse_spec(argv(&format!("--nt 2 --nr 2 --nb 4 --snr-db 0:0:1 {FAST}"))).unwrap();
    let mut diag = Vec::new();
    let rows = run_sweep(&spec, std::io::sink(), &mut diag).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].pilot_boost_bits.is_none());
    assert!(rows[0].pilot_uniform_bits.is_some());
    assert!(String::from_utf8(diag).unwrap().contains("pilot_boost"));
}

#[test]
fn json_document() {
    let spec = parse_spec(argv(&format!("--nt 1 --nr 1 --nb 3 --snr-db 0:5:5 --format json --baselines none {FAST}"))).unwrap();
    let mut buf = Vec::new();
    let rows = run_sweep(&spec, &mut buf, &mut std::io::sink()).unwrap();
    let doc: serde_json::Value = serde_json::from_slice(&buf).unwrap();
    assert_eq!(doc["spec"]["nb"], 3);
    let arr = doc["rows"].as_array().unwrap();
    assert_eq!(arr.len(), rows.len());
    assert_eq!(arr[1]["mi_bits"].as_f64().unwrap(), rows[1].mi_bits);
    assert!(arr[0]["capacity_csi_bits"].is_null());
    for c in COLUMNS {
        assert!(arr[0].get(c).is_some(), "{c}");
    }
}

#[test]
fn files_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_bfmi");
    let run = |name: &str, seed: u64| {
        let path = dir.path().join(name);
        let status = Command::new(bin)
            .args(argv(&format!("--nt 1 --nr 1 --nb 10 --snr-db 0:10:5 --seed {seed} {FAST}")).into_iter().skip(1))
            .arg("--output")
            .arg(&path)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read_to_string(path).unwrap()
    };
    let a = run("a.csv", 7);
    let b = run("b.csv", 7);
    let c = run("c.csv", 8);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn exit_codes() {
    let bin = env!("CARGO_BIN_EXE_bfmi");
    let code = |args: &str| Command::new(bin).args(args.split_whitespace()).output().unwrap().status.code();
    assert_eq!(code("--nt 1 --nr 1 --nb 4 --snr-db 0:10:0"), Some(2));
    assert_eq!(code("--nt 1 --nr 1 --nb 4 --snr-db 0:0:1 --unknown"), Some(2));
    assert_eq!(code("--config /nonexistent/bfmi.toml"), Some(4));
    assert_eq!(code("--nt 1 --nr 1 --nb 4 --snr-db 0:0:1 --output /nonexistent/dir/out.csv"), Some(4));
    assert_eq!(code("--help"), Some(0));
    let out = Command::new(bin)
        .args("--nt 1 --nr 1 --nb 2 --snr-db 0:0:1 --ci-halfwidth 0.1".split_whitespace())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("# bfmi"));
}

#[test]
fn error_classes_map_to_codes() {
    assert_eq!(CliError::Usage(String::new()).exit_code(), 2);
    assert_eq!(CliError::Numerical(String::new()).exit_code(), 3);
    assert_eq!(CliError::Io(String::new()).exit_code(), 4);
}
