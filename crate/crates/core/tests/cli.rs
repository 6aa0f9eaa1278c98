use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bianchi-flow")).args(args).current_dir(dir).output().expect("spawn binary")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&read(dir, name)).unwrap()
}

#[test]
fn simulate_writes_trajectory_and_summary() {
    let dir = TempDir::new().unwrap();
    let o = bin(
        &["simulate", "--class", "su2", "--initial", "2,1.6,1.25", "--out", "t.csv", "--summary", "s.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = read(dir.path(), "t.csv");
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,A,B,C,K23,K31,K12,R,product_drift"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert!(rows.len() > 100);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));

    let s = json(dir.path(), "s.json");
    assert_eq!(s["class"], "su2");
    assert_eq!(s["case"], "generic");
    assert_eq!(s["terminal"], "blowup_ceiling");
    let t_plus = s["t_plus"].as_f64().unwrap();
    assert!((t_plus - 0.181_758_294_467).abs() < 1e-9, "{t_plus}");
    assert!((s["exponents"]["A"].as_f64().unwrap() + 0.5).abs() < 0.02);
    assert_eq!(s["invariants_passed"], true);
}

#[test]
fn outputs_are_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    for tag in ["1", "2"] {
        let out = format!("t{tag}.csv");
        let summary = format!("s{tag}.json");
        let o =
            bin(&["simulate", "--class", "e2", "--initial", "2,1,2", "--out", &out, "--summary", &summary], dir.path());
        assert_eq!(code(&o), 0);
        let grid = format!("g{tag}.csv");
        let o = bin(&["sweep", "--class", "sl2r", "--grid", "A=0.5:2:3,B=2:4:3", "--out", &grid], dir.path());
        assert_eq!(code(&o), 0);
    }
    for (a, b) in [("t1.csv", "t2.csv"), ("s1.json", "s2.json"), ("g1.csv", "g2.csv")] {
        assert_eq!(std::fs::read(dir.path().join(a)).unwrap(), std::fs::read(dir.path().join(b)).unwrap(), "{a}");
    }
}

#[test]
fn summary_reports_original_frame_for_rescaled_input() {
    let dir = TempDir::new().unwrap();
    // 8x the canonical datum: lambda = 2, times scale by 2.
    let o = bin(&["simulate", "--class", "su2", "--initial", "4,3.2,2.5", "--summary", "s.json"], dir.path());
    assert_eq!(code(&o), 0);
    let s = json(dir.path(), "s.json");
    assert!((s["lambda"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((s["t_plus"].as_f64().unwrap() - 0.181_758_294_467).abs() < 1e-9);
}

#[test]
fn classify_grid_has_single_transition() {
    let dir = TempDir::new().unwrap();
    let o = bin(&["classify", "--class", "sl2r", "--grid", "x=0.5:2:17", "--out", "c.csv"], dir.path());
    assert_eq!(code(&o), 0);
    let csv = read(dir.path(), "c.csv");
    let labels: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(labels.len(), 17);
    assert_eq!(labels[0], "Q2");
    assert_eq!(labels[16], "Q1");
    assert_eq!(labels.windows(2).filter(|w| w[0] != w[1]).count(), 1);
}

#[test]
fn classify_bisect_brackets_the_boundary() {
    let dir = TempDir::new().unwrap();
    let o = bin(&["classify", "--bisect", "0.5:2:1e-6", "--summary", "b.json"], dir.path());
    assert_eq!(code(&o), 0);
    let b = json(dir.path(), "b.json");
    let (lo, hi) = (b["lo"].as_f64().unwrap(), b["hi"].as_f64().unwrap());
    assert!(hi - lo <= 1e-6);
    assert!(lo < 1.638_846_3 && hi > 1.638_846_2, "[{lo}, {hi}]");
    assert_ne!(b["label_lo"], b["label_hi"]);
}

#[test]
fn sweep_writes_one_row_per_point() {
    let dir = TempDir::new().unwrap();
    let o = bin(&["sweep", "--class", "su2", "--grid", "A=1:3:3,B=0.5:1.5:2", "--out", "w.csv"], dir.path());
    assert_eq!(code(&o), 0);
    let csv = read(dir.path(), "w.csv");
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("index,A0,B0,C0,status"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.split(',').nth(4) == Some("ok")));
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"class": "nil", "direction": "forward", "initial": [1, 2, 2], "horizon": 1.0, "summary": "s.json"}"#,
    )
    .unwrap();
    let o = bin(&["simulate", "--config", "run.json", "--horizon", "2"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = json(dir.path(), "s.json");
    assert_eq!(s["class"], "nil");
    assert_eq!(s["terminal"], "reached_tmax");
    assert_eq!(s["final"]["t"].as_f64().unwrap(), 2.0);

    std::fs::write(dir.path().join("bad.json"), r#"{"class": "nil", "colour": 3}"#).unwrap();
    assert_eq!(code(&bin(&["simulate", "--config", "bad.json"], dir.path())), 2);
}

#[test]
fn invalid_input_exits_two() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["simulate", "--class", "foo", "--initial", "1,2,2"][..],
        &["simulate", "--class", "su2", "--initial", "1,-2,2"],
        &["simulate", "--class", "su2", "--initial", "1,2"],
        &["simulate", "--class", "sl2r", "--initial", "2,1,2", "--no-swap"],
        &["classify", "--class", "su2", "--initial", "1,2,2"],
        &["sweep", "--class", "su2", "--grid", "A=1:3"],
        &["simulate", "--no-such-flag"],
    ] {
        assert_eq!(code(&bin(args, dir.path())), 2, "{args:?}");
    }
}

#[test]
fn verify_passes_and_catches_a_flipped_rhs() {
    let dir = TempDir::new().unwrap();
    let o = bin(&["verify", "--summary", "v.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v = json(dir.path(), "v.json");
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["passed"] == true));

    let o = bin(&["verify", "--fault", "flip-rhs-sign"], dir.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
