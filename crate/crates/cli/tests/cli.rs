use std::path::Path;
use std::process::{Command, Output};

use irs_coverage::table::csv_body;
use irs_coverage::ResultTable;

fn irscov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irscov")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn unknown_config_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "n1 = 8\nfrobnicate = 3\n");
    let o = irscov(&["--config", &cfg, "convergence"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("frobnicate"));
}

#[test]
fn invalid_values_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "alpha_12 = 1.5\n");
    assert_eq!(irscov(&["--config", &cfg, "convergence"]).status.code(), Some(1));
    assert_eq!(irscov(&["--config", "/nonexistent/x.toml", "validate"]).status.code(), Some(1));
    assert_eq!(irscov(&["--m-terms", "0", "convergence"]).status.code(), Some(1));
    assert_eq!(irscov(&["split-sweep", "--n1", "0"]).status.code(), Some(1));
}

#[test]
fn bad_flags_exit_1_and_help_exits_0() {
    assert_eq!(irscov(&["--no-such-flag", "validate"]).status.code(), Some(1));
    assert_eq!(irscov(&["--threshold-mode", "dbm", "validate"]).status.code(), Some(1));
    assert_eq!(irscov(&[]).status.code(), Some(1));
    assert_eq!(irscov(&["--help"]).status.code(), Some(0));
    assert_eq!(irscov(&["--version"]).status.code(), Some(0));
}

#[test]
fn validate_reports_failures_with_exit_2() {
    let o = irscov(&["validate", "--trials", "2000", "--mean-trials", "20000"]);
    // the analytic-vs-simulated coverage check fails at the reference scenario
    assert_eq!(o.status.code(), Some(2));
    let t = ResultTable::read_csv(&stdout(&o)).unwrap();
    assert!(t.failed_checks() >= 1);
    let checks: Vec<&str> = t.column("check").unwrap().into_iter().filter_map(|c| c.as_str()).collect();
    assert!(checks.contains(&"form_identity"));
}

#[test]
fn convergence_trace_columns_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/trace.csv");
    let json = dir.path().join("trace.json");
    let o = irscov(&[
        "convergence",
        "--n1",
        "6",
        "--init",
        "random",
        "--out",
        out.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    let t = ResultTable::read_csv(&text).unwrap();
    for c in ["outer_iter", "irs_updated", "p_coverage", "gamma_bar_eff", "step_size"] {
        assert!(t.column_index(c).is_some(), "missing column {c}");
    }
    let p: Vec<f64> = t.column("p_coverage").unwrap().into_iter().filter_map(|c| c.as_f64()).collect();
    assert!(p.windows(2).all(|w| w[1] >= w[0]));
    let from_json = ResultTable::from_json(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(from_json.rows, t.rows);
    assert_eq!(from_json.columns, t.columns);
}

#[test]
fn header_echoes_config_and_run_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.toml", "n1 = 8\nn2 = 8\nr_2r_m = 20.0\nthreshold_mode = \"snr\"\n");
    let o = irscov(&["--config", &cfg, "--seed", "42", "single-vs-double", "--n-total", "16", "--trials", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let t = ResultTable::read_csv(&stdout(&o)).unwrap();
    assert_eq!(t.meta("seed"), Some("42"));
    assert_eq!(t.meta("experiment"), Some("single-vs-double"));
    assert!(t.meta("version").is_some());
    let config: Vec<&str> = t.metadata.iter().filter(|(k, _)| k == "config").map(|(_, v)| v.as_str()).collect();
    assert!(config.contains(&"r_2r_m = 20.0"), "{config:?}");
    assert!(config.iter().any(|l| l.starts_with("threshold_mode") && l.contains("snr")));
    // zero trials leaves the simulated columns empty
    assert!(t.column("p_double_empirical").unwrap().iter().all(|c| c.as_f64().is_none()));
}

#[test]
fn threshold_mode_flag_overrides_config() {
    let a = irscov(&["single-vs-double", "--trials", "0", "--thresholds", "1,3", "--threshold-mode", "rate"]);
    let b = irscov(&["single-vs-double", "--trials", "0", "--thresholds", "1,3", "--threshold-mode", "snr"]);
    let ta = ResultTable::read_csv(&stdout(&a)).unwrap();
    let tb = ResultTable::read_csv(&stdout(&b)).unwrap();
    let snr = |t: &ResultTable| -> Vec<f64> { t.column("threshold_snr").unwrap().into_iter().filter_map(|c| c.as_f64()).collect() };
    assert_eq!(snr(&ta), vec![1.0, 7.0]);
    assert_eq!(snr(&tb), vec![1.0, 3.0]);
}

#[test]
fn correlation_matrix_export() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("r1.csv");
    let o = irscov(&[
        "correlation",
        "--n-total",
        "16",
        "--trials",
        "0",
        "--random-configs",
        "3",
        "--export-matrix",
        m.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<Vec<f64>> = std::fs::read_to_string(&m)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 8);
    for (i, row) in rows.iter().enumerate() {
        assert_eq!(row.len(), 8);
        for (j, x) in row.iter().enumerate() {
            assert_eq!(*x, rows[j][i]);
        }
        assert!(row[i] > 0.0);
    }
    let t = ResultTable::read_csv(&stdout(&o)).unwrap();
    let corr: Vec<&str> = t.column("correlation").unwrap().into_iter().filter_map(|c| c.as_str()).collect();
    assert!(corr.contains(&"none") && corr.contains(&"sinc"));
}

#[test]
fn same_seed_same_body_different_seed_different_body() {
    let args = |seed: &'static str| ["split-sweep", "--n-total", "16", "--trials", "3000", "--seed", seed];
    let a = stdout(&irscov(&args("5")));
    let b = stdout(&irscov(&args("5")));
    let c = stdout(&irscov(&args("6")));
    assert_eq!(csv_body(&a), csv_body(&b));
    assert_ne!(csv_body(&a), csv_body(&c));
}
