use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_delaypred"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn scalar(r: f64, h: f64, extra: &str) -> String {
    format!(
        r#"{{"model": {{"kind": "scalar", "kappa": 3}},
            "predictor": {{"kind": "closed_form", "l": 1, "q": 1}},
            "loop": {{"mu": 1, "r": {r}, "h": {h}, "t_end": 20}}{extra}}}"#
    )
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn certified_run_converges() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        &scalar(0.25, 0.0025, r#", "initial": {"kind": "random", "x_radius": 10, "w_radius": 10}"#),
    );
    let out = dir.path().join("t.csv");
    let o = run(&["simulate", p(&cfg), "--out", p(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("envelope: OK"));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("t,x_1,u_1,w_1,norm\n"));
    assert_eq!(csv.lines().count(), 8002);
}

#[test]
fn zero_initial_data_gives_zero_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "z.json", &scalar(0.25, 0.025, ""));
    let o = run(&["simulate", p(&cfg)]);
    assert_eq!(o.status.code(), Some(0));
    let csv = stdout(&o);
    for line in csv.lines().skip(1) {
        assert!(line.split(',').skip(1).all(|v| v == "0"), "{line}");
    }
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "d.json",
        &scalar(0.25, 0.025, r#", "initial": {"kind": "random", "x_radius": 10, "w_radius": 10}"#),
    );
    let a = run(&["simulate", p(&cfg), "--seed", "11"]).stdout;
    let b = run(&["simulate", p(&cfg), "--seed", "11"]).stdout;
    let c = run(&["simulate", p(&cfg), "--seed", "12"]).stdout;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn malformed_config_exits_3_with_location() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bad.json", "{\n  \"model\": {\"kind\": \"scalar\", \"kappa\": 3},\n  \"loop\": {\"r\": \"x\"}\n}");
    let o = run(&["simulate", p(&cfg)]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
    let cfg = write(&dir, "h.json", &scalar(0.25, 0.07, ""));
    let o = run(&["simulate", p(&cfg)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("loop.h"));
}

#[test]
fn over_delayed_loop_diverges() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "div.json",
        r#"{"model": {"kind": "linear", "a": [[1]], "b": [[1]]}, "feedback": {"gain": [[-2]]},
            "predictor": {"kind": "none"}, "loop": {"r": 2, "h": 0.02, "t_end": 400},
            "initial": {"kind": "given", "x0": [1]}}"#,
    );
    let o = run(&["simulate", p(&cfg), "--out", p(&dir.path().join("d.csv"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn certify_reports_scalar_threshold() {
    let dir = TempDir::new().unwrap();
    let ok = write(&dir, "ok.json", &scalar(0.25, 0.0025, ""));
    let o = run(&["certify", p(&ok)]);
    assert_eq!(o.status.code(), Some(0));
    let report = stdout(&o);
    let line = report.lines().find(|l| l.starts_with("scalar-4.4")).unwrap();
    assert!(line.contains("yes") && line.contains("0.26287855"), "{line}");

    let fail = write(&dir, "fail.json", &scalar(0.3, 0.003, r#", "certificates": ["scalar-4.4"]"#));
    let o = run(&["certify", p(&fail)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).lines().any(|l| l.starts_with("scalar-4.4") && l.contains(" no ")));
}

#[test]
fn exact_predictor_passes_small_gain_trivially() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "smith.json",
        r#"{"model": {"kind": "linear", "a": [[0, 1], [0, 0]], "b": [[0], [1]]},
            "feedback": {"gain": [[-2, -3]]}, "predictor": {"kind": "smith"},
            "loop": {"mu": 5, "r": 1, "h": 0.01, "t_end": 30},
            "initial": {"kind": "random", "x_radius": 5, "w_radius": 5}}"#,
    );
    let o = run(&["certify", p(&cfg)]);
    assert_eq!(o.status.code(), Some(0));
    let report = stdout(&o);
    for name in ["smallgain-2.13", "smallgain-2.42"] {
        let line = report.lines().find(|l| l.starts_with(name)).unwrap();
        assert!(line.contains("yes"), "{line}");
    }
    let o = run(&["simulate", p(&cfg), "--out", p(&dir.path().join("s.csv"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

fn rmax_column(o: &Output) -> Vec<f64> {
    stdout(o)
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(4).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn rmax_sweeps() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "r.json", &scalar(0.25, 0.0025, ""));
    let o = run(&["rmax", p(&cfg), "--certificate", "scalar-4.4", "--l", "1..10"]);
    assert_eq!(o.status.code(), Some(0));
    let col = rmax_column(&o);
    assert_eq!(col.len(), 10);
    assert!(col.windows(2).all(|w| w[0] < w[1] && w[1] < 1.0));
    assert!((col[0] - 0.26288).abs() < 1e-5);

    let o = run(&["rmax", p(&cfg), "--certificate", "scalar-4.5", "--l", "1"]);
    assert!((rmax_column(&o)[0] - 0.3058).abs() < 1e-4);

    let o = run(&["rmax", p(&cfg), "--certificate", "scalar-4.6", "--mu", "1,10,100"]);
    let col = rmax_column(&o);
    assert!(col.windows(2).all(|w| w[0] < w[1]));
    assert!((col[2] - 0.5284).abs() < 1e-4);

    let csv_path = dir.path().join("r.csv");
    let o = run(&["rmax", p(&cfg), "--certificate", "scalar-4.4", "--l", "2", "--out", p(&csv_path)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(std::fs::read_to_string(&csv_path).unwrap().contains("scalar-4.4,2,1,1,0.386"));
}

#[test]
fn predict_matches_oracle_within_bound() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "p.json",
        r#"{"model": {"kind": "scalar", "kappa": 3},
            "predictor": {"kind": "closed_form", "l": 1, "q": 2},
            "loop": {"r": 0.3, "h": 0.003}}"#,
    );
    let mut hist = String::from("theta,u_1\n");
    for j in 0..=60 {
        let theta = -0.3 + j as f64 * 0.005;
        hist.push_str(&format!("{theta},{}\n", 2.0 * (4.0 * theta).sin()));
    }
    let h = write(&dir, "h.csv", &hist);
    let o = run(&["predict", p(&cfg), "--x", "-1.5", "--history", p(&h)]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("within bound"));
    let diff: f64 = text
        .lines()
        .find(|l| l.starts_with("generic picard p"))
        .and_then(|l| l.split("|diff| = ").nth(1))
        .map(|v| v.trim_end_matches(')').parse().unwrap())
        .unwrap();
    assert!(diff < 1e-9);

    let o = run(&["predict", p(&cfg), "--x", "0"]);
    let text = stdout(&o);
    let p_line = text.lines().find(|l| l.starts_with("p(x, u)")).unwrap();
    let value: f64 = p_line.split('[').nth(1).unwrap().trim_end_matches(']').parse().unwrap();
    assert_eq!(value, 0.0, "{p_line}");
}
