use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_toric-theta")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const CANONICAL: &str = r#"{
  "model": {
    "polytope": {"dim": 1, "vertices": [[0], [1]]},
    "weight": {"kind": "canonical"},
    "measure": {"kind": "haar"}
  },
  "scan": {"k_list": [5, 10, 20, 30, 40, 50, 60]}
}"#;

#[test]
fn degree_of_fubini_study() {
    let o = run(&["degree"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["degree"].as_f64().unwrap() - 0.5).abs() <= 1e-6);
    assert!((v["degree_by_slopes"].as_f64().unwrap() - 0.5).abs() <= 1e-6);
}

#[test]
fn lattice_suite_passes() {
    let o = run(&["verify", "--suite", "lattice", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3);
    assert!(text.contains("poisson_residual="));
}

#[test]
fn verify_is_deterministic() {
    let a = run(&["verify", "--suite", "equilibrium", "--seed", "3"]);
    let b = run(&["verify", "--suite", "equilibrium", "--seed", "3", "--jobs", "1"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn canonical_volume_scan_decreases_to_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("canonical.json");
    fs::write(&cfg, CANONICAL).unwrap();
    let out = dir.path().join("out");
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "volume-scan"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|&h| h == "v_k").unwrap();
    let v: Vec<f64> = lines.map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(v.len(), 7);
    assert!(v.windows(2).all(|w| w[1] < w[0]));
    assert!(v[6] < 0.003 && v[6] > 0.0);
    assert_eq!(fs::read_to_string(out.join("volume_scan.csv")).unwrap(), text);
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("volume_scan_fit.json")).unwrap()).unwrap();
    assert!(fit["limit"].as_f64().unwrap().abs() < 1e-3);
}

#[test]
fn reals_have_seventeen_digits() {
    let o = run(&["count"]);
    let text = stdout(&o);
    let row = text.lines().nth(1).unwrap();
    let field = row.split(',').nth(2).unwrap();
    let mantissa = field.split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "{field}");
    assert!(!text.contains('\r'));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"model": {"polytope": {"dim": 1, "vertices": [[0], [1]]}}}"#).unwrap();
    assert_eq!(run(&["--config", bad.to_str().unwrap(), "degree"]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--suite", "nonsense"]).status.code(), Some(2));
    let square = dir.path().join("square.json");
    fs::write(
        &square,
        r#"{"model": {"polytope": {"dim": 2, "vertices": [[0,0],[1,0],[0,1],[1,1]]}, "weight": {"kind": "canonical"}, "measure": {"kind": "haar"}}}"#,
    )
    .unwrap();
    // degrees are implemented on curves only
    assert_eq!(run(&["--config", square.to_str().unwrap(), "degree"]).status.code(), Some(3));
    assert_eq!(run(&["--config", square.to_str().unwrap(), "count"]).status.code(), Some(0));
}
