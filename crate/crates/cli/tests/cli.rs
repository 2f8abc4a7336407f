use std::fs;
use std::process::{Command, Output};

fn fdl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdl")).args(args).env("FDL_THREADS", "2").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let k = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(k).unwrap().to_string()).collect()
}

#[test]
fn eval_prints_one_row_and_echoes_config() {
    let o = fdl(&["eval", "--L", "3", "--m", "2", "--rho", "0.9", "--delta", "0.1", "--gbar1-db", "10", "--mod", "bpsk", "--anpe-target", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2);
    let anpe: f64 = column(&out, "anpe")[0].parse().unwrap();
    assert!((anpe - 3.0).abs() < 1e-6);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("# [system]") && err.contains("rho = 0.9"));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[system]\nbranches = 3\nrho = 0.2\nmodulation = \"pam\"\norder = 4\n[snr]\nstart_db = 0.0\nstop_db = 10.0\nstep_db = 5.0\n").unwrap();
    let out = dir.path().join("res.csv");
    let o = fdl(&["sweep", "--config", cfg.to_str().unwrap(), "--rho", "0.7", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(column(&csv, "rho"), vec!["0.7"; 3]);
    assert_eq!(column(&csv, "L"), vec!["3"; 3]);
    assert_eq!(column(&csv, "modulation"), vec!["4-pam"; 3]);
    let echo = fs::read_to_string(dir.path().join("res.config.toml")).unwrap();
    assert!(echo.contains("rho = 0.7") && echo.contains("stop_db = 10.0"));
}

#[test]
fn config_errors_exit_with_2() {
    assert_eq!(fdl(&["eval", "--rho", "1.5"]).status.code(), Some(2));
    assert_eq!(fdl(&["eval", "--mod", "qam", "--M", "8"]).status.code(), Some(2));
    assert_eq!(fdl(&["sweep", "--gbar1-range", "10:0:1"]).status.code(), Some(2));
    assert_eq!(fdl(&["eval", "--convention", "cholesky"]).status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_fdl")).args(["eval"]).env("FDL_THREADS", "none").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_with_3() {
    let o = fdl(&["eval", "--L", "3", "--rho", "0.95", "--m", "3", "--gbar1-db", "0", "--gt1", "5", "--n-max", "3"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(column(&stdout(&o), "status"), vec!["error"]);
}

#[test]
fn unreachable_target_exits_with_4() {
    let o = fdl(&["solve-threshold", "--L", "2", "--anpe-target", "1e300"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn solve_threshold_matches_closed_form() {
    // near-independent Rayleigh: gT1 = gbar ln L
    let o = fdl(&["solve-threshold", "--L", "4", "--rho", "0", "--correlation", "independent", "--gbar1-db", "10", "--anpe-target", "4"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let gt: f64 = column(&stdout(&o), "gt1")[0].parse().unwrap();
    assert!((gt - 10.0 * 4f64.ln()).abs() < 1e-6 * gt);
}

#[test]
fn simulate_is_reproducible_across_thread_counts() {
    let args = ["simulate", "--L", "3", "--rho", "0.6", "--gbar1-db", "5", "--gt1", "3", "--samples", "50000", "--seed", "9"];
    let a = fdl(&args);
    let b = Command::new(env!("CARGO_BIN_EXE_fdl")).args(args).env("FDL_THREADS", "1").output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(column(&stdout(&a), "method"), vec!["mc"]);
}

#[test]
fn calibrate_reports_a_verdict() {
    let o = fdl(&["calibrate", "--L", "3", "--rho", "0.9", "--gbar1-db", "5", "--samples", "200000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("verdict: matched: elementwise"), "{text}");
}

#[test]
fn reproduce_writes_csv_and_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdl(&["reproduce", "fig6", "--out", dir.path().to_str().unwrap(), "--gbar1-range", "0:10:5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("fig6.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
    assert!(column(&csv, "status").iter().all(|s| s == "ok"));
    assert!(dir.path().join("fig6.config.toml").exists());
    assert_eq!(fdl(&["reproduce", "fig2", "--out", dir.path().to_str().unwrap()]).status.code(), Some(2));
}
