use std::path::{Path, PathBuf};
use std::process::Command;

use vstab::output::{parse_pv_csv, SummaryJson, HISTOGRAM_HEADER, SUMMARY_HEADER};
use vstab::run::{run, RunConfig, ScMode, HISTOGRAM_FILE, PV_CURVES_FILE, SUMMARY_CSV_FILE, SUMMARY_JSON_FILE};

const OUTPUTS: [&str; 4] = [PV_CURVES_FILE, SUMMARY_CSV_FILE, SUMMARY_JSON_FILE, HISTOGRAM_FILE];

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn config(sc: ScMode, order: u8, out: &Path) -> RunConfig {
    let mut c = RunConfig::new(data("ieee14.cdf"), out);
    c.sidecar_path = Some(data("ieee14.toml"));
    c.sc_mode = sc;
    c.contingency_order = order;
    c
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn vstab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vstab"))
}

#[test]
fn case_one_histogram_has_bus_14_twelve_times() {
    let dir = tempfile::tempdir().unwrap();
    run(&config(ScMode::Without, 1, dir.path())).unwrap();
    let hist = read(dir.path(), HISTOGRAM_FILE);
    assert!(hist.lines().any(|l| l == "14,12"), "{hist}");
    let summary = read(dir.path(), SUMMARY_CSV_FILE);
    let (_, section) = summary.split_once("\n\nbus,frequency\n").unwrap();
    assert!(section.lines().any(|l| l == "14,12"));
}

#[test]
fn base_only_with_condensers_reports_bus_5() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&config(ScMode::With, 0, dir.path())).unwrap();
    assert_eq!(report.base_critical.map(|b| b.0), Some(5));
    assert!(report.results.is_empty());
    let json: SummaryJson = serde_json::from_str(&read(dir.path(), SUMMARY_JSON_FILE)).unwrap();
    assert_eq!(json.base.critical_bus, Some(5));
    assert_eq!(
        read(dir.path(), SUMMARY_CSV_FILE),
        format!("{SUMMARY_HEADER}\n\n{HISTOGRAM_HEADER}\n")
    );
}

#[test]
fn outputs_parse_and_agree() {
    let dir = tempfile::tempdir().unwrap();
    let report = run(&config(ScMode::With, 1, dir.path())).unwrap();
    let json: SummaryJson = serde_json::from_str(&read(dir.path(), SUMMARY_JSON_FILE)).unwrap();

    assert_eq!(json.rows.len(), report.results.len());
    for (row, res) in json.rows.iter().zip(&report.results) {
        assert_eq!(row.line_name, res.spec.label);
        assert_eq!(row.critical_bus, res.critical_bus.map(|b| b.0));
        match (row.margin_mw, res.margin) {
            (Some(a), Some(b)) => assert!((a - b).abs() <= 5e-7),
            (None, None) => {}
            other => panic!("margin mismatch {other:?}"),
        }
    }
    assert_eq!(json.modal_bus, report.report.modal_bus().ok().map(|b| b.0));
    assert!(json.inputs["case_sha256"].as_str().unwrap().len() == 64);
    assert!(json.inputs["sidecar_sha256"].is_string());
    assert_eq!(json.settings["enforce_q_limits"], false);

    // summary.csv: table rows, blank line, histogram identical to histogram.csv
    let summary = read(dir.path(), SUMMARY_CSV_FILE);
    let (table, hist) = summary.split_once("\n\n").unwrap();
    assert_eq!(hist, read(dir.path(), HISTOGRAM_FILE));
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some(SUMMARY_HEADER));
    for (line, row) in lines.zip(&json.rows) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 3);
        assert_eq!(cells[0].parse::<usize>().unwrap(), row.contingency_number);
        assert_eq!(cells[1], row.line_name);
        assert_eq!(cells[2].parse::<u32>().ok(), row.critical_bus);
    }
    let mut total = 0;
    for (line, e) in hist.lines().skip(1).zip(&json.histogram) {
        assert_eq!(line, format!("{},{}", e.bus, e.frequency));
        total += e.frequency;
    }
    assert_eq!(total, json.feasible_contingencies);

    let rows = parse_pv_csv(&read(dir.path(), PV_CURVES_FILE)).unwrap();
    let labels: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(labels.len(), 1 + report.report.feasible_count());
    assert!(rows.iter().all(|r| r.v_pu > 0.0 && r.v_pu < 1.2));
}

#[test]
fn missing_case_exits_with_parse_code_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let status = vstab()
        .args(["--case", "/nonexistent/case.cdf", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    for f in OUTPUTS {
        assert!(!out.join(f).exists());
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.cdf");
    std::fs::write(&bad, "garbage\n").unwrap();
    let code = |args: &[&str]| {
        vstab()
            .args(args)
            .arg("--out")
            .arg(dir.path().join("o"))
            .status()
            .unwrap()
            .code()
    };
    let case = data("ieee14.cdf");
    let case = case.to_str().unwrap();
    assert_eq!(code(&["--case", bad.to_str().unwrap()]), Some(3));
    assert_eq!(code(&["--case", case, "--workers", "0"]), Some(6));
    assert_eq!(code(&["--case", case, "--step-mw", "0"]), Some(6));
    assert_eq!(code(&["--case", case, "--renewable", "dfig:99:60"]), Some(6));
    assert_eq!(code(&["--case", case, "--bogus"]), Some(2));
    assert_eq!(code(&["--case", case, "--order", "0"]), Some(0));
}

#[test]
fn unwritable_output_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let err = run(&config(ScMode::With, 0, &blocker.join("sub"))).unwrap_err();
    assert_eq!(err.exit_code(), 5);
}

#[test]
fn worker_count_does_not_change_outputs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = config(ScMode::Without, 1, a.path());
    ca.workers = 1;
    let mut cb = config(ScMode::Without, 1, b.path());
    cb.workers = 8;
    run(&ca).unwrap();
    run(&cb).unwrap();
    for f in OUTPUTS {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
}
