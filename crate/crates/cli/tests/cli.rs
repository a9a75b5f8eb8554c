use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn tvdmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tvdmd")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: [&str; 8] = ["--n", "6", "--m", "80", "--seed", "3", "--window", "20"];

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&tvdmd(&["--help"])), 0);
    assert_eq!(code(&tvdmd(&["--version"])), 0);
    assert_eq!(code(&tvdmd(&["stream", "--help"])), 0);
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.csv");
    assert_eq!(code(&tvdmd(&["bogus"])), 1);
    assert_eq!(code(&tvdmd(&["stream", "--model", "svd", "--out", p(&out)])), 1);
    assert_eq!(code(&tvdmd(&["stream"])), 1);
    assert_eq!(code(&tvdmd(&["stream", "--rho", "1.5", "--out", p(&out)])), 1);
    assert_eq!(code(&tvdmd(&["stream", "--rank", "3", "--sigma-thr", "0.1", "--out", p(&out)])), 1);
    assert_eq!(code(&tvdmd(&["stream", "--model", "dmd,dmdc", "--out", p(&out)])), 1);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "1,2,3\n4,five,6\n").unwrap();
    let out = dir.path().join("r.csv");
    let o = tvdmd(&["stream", "--data", p(&bad), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row 2"));
    assert_eq!(code(&tvdmd(&["stream", "--data", p(&dir.path().join("none.csv")), "--out", p(&out)])), 2);
}

#[test]
fn numerical_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let zeros = dir.path().join("zeros.csv");
    fs::write(&zeros, "0,0\n".repeat(30)).unwrap();
    let out = dir.path().join("r.csv");
    let o = tvdmd(&["stream", "--data", p(&zeros), "--init-window", "5", "--horizon", "2", "--out", p(&out)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn gen_then_stream_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    assert_eq!(code(&tvdmd(&["gen", "--n", "5", "--l", "1", "--m", "60", "--epsilon", "0", "--out", p(&data)])), 0);
    let header = fs::read_to_string(&data).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "x1,x2,x3,x4,x5,u1");
    let out = dir.path().join("r.csv");
    let o = tvdmd(&[
        "stream", "--data", p(&data), "--input-channels", "1", "--model", "dmdc", "--init-window", "20", "--horizon", "5",
        "--out", p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 60 - 1 - 20 - 5);
    assert!(lines[0].starts_with("k,rank,rebuild,nrmse,frob_error,sv1"));
    // Exact LTI identification: forecast error is round-off.
    for l in &lines[1..] {
        let frob: f64 = l.split(',').nth(4).unwrap().parse().unwrap();
        assert!(frob < 1e-6, "{l}");
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"n": 6, "m": 80, "model": "dmdc", "mode": "windowed", "window": 20, "horizon": 4, "format": "json"}"#).unwrap();
    let out = dir.path().join("r.json");
    let o = tvdmd(&["stream", "--config", p(&cfg), "--horizon", "6", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = tvdmd_core::harness::load_report_json(&out).unwrap();
    assert_eq!(report.meta.spec.horizon, 6);
    assert_eq!(report.meta.spec.model, tvdmd_core::ModelKind::Dmdc);
    assert_eq!(report.records.len(), 80 - 1 - 20 - 6);
    assert_eq!(report.meta.seed, Some(0));

    fs::write(&cfg, r#"{"windw": 20}"#).unwrap();
    assert_eq!(code(&tvdmd(&["stream", "--config", p(&cfg), "--out", p(&out)])), 1);
}

#[test]
fn compare_joins_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.csv");
    let mut args = vec!["compare", "--model", "dmd,dmdc,onlinec", "--mode", "weighted,windowed", "--out", p(&out)];
    args.extend(SMALL);
    let o = tvdmd(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let head = text.lines().next().unwrap();
    assert_eq!(head.split(',').count(), 1 + 6 * 3);
    assert!(head.contains("dmdc_windowed_frob_error"));
    assert_eq!(text.lines().count(), 1 + 80 - 1 - 20 - 10);
}

#[test]
fn spectrum_dump() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    let mut args = vec!["spectrum", "--step", "30", "--out", p(&out)];
    args.extend(SMALL);
    let o = tvdmd(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 6);
    assert!(text.starts_with("index,re,im,modulus,cont_re,cont_im,phi1_re,phi1_im"));

    let json = dir.path().join("s.json");
    let mut args = vec!["spectrum", "--format", "json", "--kind", "projected", "--out", p(&json)];
    args.extend(SMALL);
    assert_eq!(code(&tvdmd(&args)), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["k"], 80 - 2 - 10);
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 6);

    let mut args = vec!["spectrum", "--step", "5", "--out", p(&out)];
    args.extend(SMALL);
    assert_eq!(code(&tvdmd(&args)), 1);
}

#[test]
fn timing_only_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let mut args = vec!["stream", "--format", "json", "--record-timing", "--out", p(&out)];
    args.extend(SMALL);
    assert_eq!(code(&tvdmd(&args)), 0);
    assert!(fs::read_to_string(&out).unwrap().contains("wall_clock_s"));
}
