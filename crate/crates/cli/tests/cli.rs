//! End-to-end runs of the `plc-capacity` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_plc-capacity"));
    cmd.env_remove("PLC_CAPACITY_THREADS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str) -> Table {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers().unwrap().iter().map(String::from).collect();
        let rows = r
            .records()
            .map(|rec| rec.unwrap().iter().map(String::from).collect())
            .collect();
        Table { header, rows }
    }

    fn col(&self, name: &str) -> usize {
        self.header.iter().position(|h| h == name).unwrap()
    }

    fn num(&self, row: usize, name: &str) -> Option<f64> {
        let s = &self.rows[row][self.col(name)];
        (!s.is_empty()).then(|| s.parse().unwrap())
    }
}

#[test]
fn nakagami_sweep_has_all_rows_and_both_lower_bounds() {
    let out = run(&["bounds", "--preset", "nakagami-iid", "--snr", "0:2:30"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let t = Table::parse(&stdout(&out));
    assert_eq!(
        t.header,
        [
            "snr_db",
            "p_tilde",
            "upper_bps",
            "lower1_bps",
            "lower2_bps",
            "c_gauss_bps",
            "delta",
            "h_rate_low",
            "h_rate_high",
            "flags"
        ]
    );
    assert_eq!(t.rows.len(), 16);
    for i in 0..16 {
        assert_eq!(t.num(i, "snr_db").unwrap(), 2.0 * i as f64);
        let upper = t.num(i, "upper_bps").unwrap();
        let lower1 = t.num(i, "lower1_bps").unwrap();
        let lower2 = t.num(i, "lower2_bps").expect("lower2 present");
        assert!(lower1 <= upper + 1e-9 && lower2 <= upper + 1e-9);
    }
}

#[test]
fn gm1_iid_at_12_db_lower_bound() {
    let out = run(&["bounds", "--preset", "gm1-iid", "--snr", "12"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let t = Table::parse(&stdout(&out));
    assert_eq!(t.rows.len(), 1);
    let lower = t
        .num(0, "lower1_bps")
        .unwrap()
        .max(t.num(0, "lower2_bps").unwrap_or(f64::NEG_INFINITY));
    assert!(lower >= 6.8, "lower bound {lower}");
}

#[test]
fn csv_is_byte_identical_across_runs_and_thread_counts() {
    let args = ["bounds", "--preset", "mca-scalar", "--snr", "0:5:30", "--n-omega", "128"];
    let a = run(&args);
    let b = run(&args);
    let c = bin()
        .args(args)
        .env("PLC_CAPACITY_THREADS", "1")
        .output()
        .unwrap();
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(c.status.success(), "{}", stderr(&c));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let out = bin()
        .args(["bounds", "--preset", "gm1-iid", "--snr", "0"])
        .env("PLC_CAPACITY_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn json_and_svg_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let json = dir.path().join("b.json");
    let svg = dir.path().join("b.svg");
    let out = run(&[
        "bounds",
        "--preset",
        "gm1-scalar",
        "--snr",
        "0:10:30",
        "--n-omega",
        "128",
        "--csv",
        csv.to_str().unwrap(),
        "--json",
        json.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).is_empty());
    let t = Table::parse(&fs::read_to_string(&csv).unwrap());
    assert_eq!(t.rows.len(), 4);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["scenario"], "gm1-scalar");
    assert_eq!(report["n_omega"], 128);
    assert_eq!(report["rows"].as_array().unwrap().len(), 4);
    let upper = report["rows"][3]["upper_bps"].as_f64().unwrap();
    assert!((upper - t.num(3, "upper_bps").unwrap()).abs() <= 1e-12 * upper.abs());
    let chart = fs::read_to_string(&svg).unwrap();
    assert!(chart.starts_with("<svg") && chart.trim_end().ends_with("</svg>"));
    assert!(chart.contains("<polyline"));
}

#[test]
fn unknown_config_key_is_rejected_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        "{\n  \"schema\": 1,\n  \"preset\": \"gm1-iid\",\n  \"numerics\": {\"n_omga\": 64}\n}\n",
    );
    let out = run(&["bounds", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("numerics") && err.contains("n_omga"), "{err}");
}

#[test]
fn unknown_preset_is_a_config_error() {
    let out = run(&["bounds", "--preset", "no-such-preset", "--snr", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn singular_leading_shaping_tap_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"schema": 1,
            "scenario": {
              "channel": {"kind": "identity", "dim": 1},
              "noise": {
                "innovation": {"kind": "gaussian", "covariance": [[1.0]]},
                "shaping": {"kind": "inline", "period": 2, "memory": 1,
                            "taps": [[[0.0]], [[0.5]], [[1.0]], [[0.3]]]},
                "normalize": true},
              "units": "real-passband"},
            "sweep": {"snr_db": [10]}}"#,
    );
    let out = run(&["validate", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    let text = stdout(&out);
    assert!(text.contains("FAIL shaping_tap_nonsingular"), "{text}");
    assert!(stderr(&out).contains("shaping_tap_nonsingular"));
    let out = run(&["bounds", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gm1_validation_with_monte_carlo_passes() {
    let out = run(&["validate", "--preset", "gm1", "--snr", "0:10:30", "--mc"]);
    let text = stdout(&out);
    assert!(out.status.success(), "{text}{}", stderr(&out));
    for name in [
        "shaping_tap_nonsingular",
        "lifting_round_trip",
        "psd_identity",
        "quadrature_convergence",
        "bound_ordering",
        "entropy_mc",
    ] {
        assert!(text.contains(&format!("PASS {name}")), "{text}");
    }
}

#[test]
fn nakagami_unit_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "n.json",
        r#"{"schema": 1,
            "scenario": {
              "channel": {"kind": "identity", "dim": 2},
              "noise": {
                "innovation": {"kind": "complex-nakagami", "m": 1.0, "omega": 1.0},
                "shaping": {"kind": "identity"},
                "normalize": false},
              "units": "complex-baseband"}}"#,
    );
    let out = run(&["entropy", "--config", &cfg]);
    let text = stdout(&out);
    assert!(out.status.success(), "{}", stderr(&out));
    let bits: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("innovation entropy: "))
        .and_then(|l| l.split_whitespace().next())
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| panic!("{text}"));
    assert!((bits - 3.0942).abs() < 5e-5, "{bits}");
}

#[test]
fn entropy_report_details() {
    let out = run(&["entropy", "--preset", "gm2"]);
    let text = stdout(&out);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(text.contains("Gaussian mixture"), "{text}");
    assert!(text.contains("width"), "{text}");
    let out = run(&["entropy", "--preset", "mca"]);
    let text = stdout(&out);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(text.contains("0.9048"), "{text}");
}

#[test]
fn dumped_preset_reproduces_the_preset() {
    let dir = tempfile::tempdir().unwrap();
    let dump = run(&["presets", "dump", "mimo-gm"]);
    assert!(dump.status.success());
    let cfg = write(dir.path(), "d.json", &stdout(&dump));
    let args = ["--snr", "0:10:20", "--n-omega", "64"];
    let a = run(&[&["bounds", "--preset", "mimo-gm"][..], &args].concat());
    let b = run(&[&["bounds", "--config", cfg.as_str()][..], &args].concat());
    assert!(a.status.success(), "{}", stderr(&a));
    assert!(b.status.success(), "{}", stderr(&b));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn preset_listing() {
    let out = run(&["presets", "list"]);
    assert!(out.status.success());
    let text = stdout(&out);
    for name in ["nakagami-iid", "gm1-iid", "mca-scalar", "gm1", "nakagami-08"] {
        assert!(text.contains(name), "{text}");
    }
}
