use std::io::Write as _;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_overreact"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| {
            let mut it = l.split_whitespace();
            (it.next() == Some(key)).then(|| it.next().unwrap().parse().unwrap())
        })
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn solve_prints_the_fig1a_economy() {
    let o = run(&[
        "solve", "--gamma", "3", "--beta", "0.1", "--tau0", "0.01", "--taueps", "0.01", "--tauS", "50", "--theta", "0",
    ]);
    assert!(o.status.success());
    let t = stdout(&o);
    let a = field(&t, "a");
    assert!((a - 0.12165476403455795).abs() < 1e-12);
    assert_eq!(field(&t, "alpha"), a);
    for k in ["tau", "A", "B", "C", "wl_total"] {
        assert!(field(&t, k).is_finite());
    }
    assert_eq!(field(&t, "wl_diag"), 0.0);
}

#[test]
fn invalid_inputs_exit_two_with_the_report() {
    let o = run(&["solve", "--theta=-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("theta"));
    assert_eq!(run(&["solve", "--gamma", "0"]).status.code(), Some(2));
    assert_eq!(run(&["solve", "--bogus"]).status.code(), Some(2));
}

#[test]
fn json_round_trips_through_from_json() {
    let first = run(&["solve", "--json", "--theta", "0.4", "--delta", "0.05", "--regime", "informed", "--muS", "0.3"]);
    assert!(first.status.success());
    let mut child = bin()
        .args(["solve", "--from-json", "-", "--json"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(&first.stdout).unwrap();
    let second = child.wait_with_output().unwrap();
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
    let v: Value = serde_json::from_slice(&first.stdout).unwrap();
    assert_eq!(v["tax"]["regime"], "informed_only");
    assert!(v["welfare"]["wl_bayes"].is_null());
}

#[test]
fn figure_schemas_are_independent_of_resolution() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for name in ["fig1a", "fig1b"] {
        assert!(run(&["figure", name, "--points", "5", "--out", d]).status.success());
        let (h, rows) = read_csv(&dir.path().join(format!("{name}.csv")));
        assert_eq!(rows.len(), 5);
        for col in ["axis_value", "wl_total", "wl_bayes", "wl_market", "wl_team"] {
            assert!(h.iter().any(|c| c == col), "{name} lacks {col}");
        }
        let (lo, hi) = if name == "fig1a" { (-0.2, 0.6) } else { (-0.3, 0.3) };
        assert_eq!(rows[0][0].parse::<f64>().unwrap(), lo);
        assert_eq!(rows[4][0].parse::<f64>().unwrap(), hi);
        let m: Value = serde_json::from_slice(&std::fs::read(dir.path().join(format!("{name}.manifest.json"))).unwrap())
            .unwrap();
        assert_eq!(m["job"]["cases"][0]["mu_s"], 0.0);
    }
    let o = run(&["figure", "fig3", "--points", "4", "--out", d]);
    assert!(o.status.success());
    let (h, rows) = read_csv(&dir.path().join("fig3.csv"));
    assert_eq!(h, ["theta", "delta_opt_case1", "delta_opt_case2", "flag_case1", "flag_case2"]);
    assert_eq!(rows.len(), 4);

    let big = tempfile::tempdir().unwrap();
    run(&["figure", "fig1a", "--out", big.path().to_str().unwrap()]);
    let (h_big, rows_big) = read_csv(&big.path().join("fig1a.csv"));
    assert_eq!(rows_big.len(), 200);
    assert_eq!(h_big, read_csv(&dir.path().join("fig1a.csv")).0);
}

#[test]
fn unknown_figure_exits_two() {
    assert_eq!(run(&["figure", "fig2"]).status.code(), Some(2));
}

#[test]
fn csv_is_lf_terminated() {
    let dir = tempfile::tempdir().unwrap();
    run(&["figure", "fig3", "--points", "3", "--out", dir.path().to_str().unwrap()]);
    let bytes = std::fs::read(dir.path().join("fig3.csv")).unwrap();
    assert!(!bytes.contains(&b'\r'));
    assert_eq!(bytes.last(), Some(&b'\n'));
}

#[test]
fn replay_reproduces_simulation_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = run(&[
        "simulate", "--theta", "0.5", "--delta", "0.1", "--n-agents", "200", "--n-reps", "1000", "--seed", "7", "--out", d,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let again = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("simulate.manifest.json");
    let r = run(&["replay", manifest.to_str().unwrap(), "--out", again.path().to_str().unwrap()]);
    assert!(r.status.success());
    assert!(stdout(&r).contains("simulate.csv"));
    for f in ["simulate.csv", "simulate_summary.json", "simulate.manifest.json"] {
        assert_eq!(
            std::fs::read(dir.path().join(f)).unwrap(),
            std::fs::read(again.path().join(f)).unwrap(),
            "{f}"
        );
    }
    // a changed seed no longer matches
    let mut m: Value = serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap();
    m["job"]["sim"]["seed"] = 8.into();
    std::fs::write(&manifest, serde_json::to_vec(&m).unwrap()).unwrap();
    assert_eq!(run(&["replay", manifest.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.cfg");
    std::fs::write(&cfg, "# fig1b economy\ngamma=3\nbeta=2\ntau0=1\ntaueps=5\ntauS=1\ntheta=0.2\n").unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = stdout(&run(&["solve", "--config", c]));
    let from_flags = stdout(&run(&[
        "solve", "--gamma", "3", "--beta", "2", "--tau0", "1", "--taueps", "5", "--tauS", "1", "--theta", "0.2",
    ]));
    assert_eq!(from_file, from_flags);
    let overridden = stdout(&run(&["solve", "--config", c, "--theta", "0"]));
    assert!((field(&overridden, "a") - 0.265325577541956).abs() < 1e-12);

    std::fs::write(&cfg, "gamma=three\n").unwrap();
    assert_eq!(run(&["solve", "--config", c]).status.code(), Some(2));
    std::fs::write(&cfg, "kappa=1\n").unwrap();
    assert_eq!(run(&["solve", "--config", c]).status.code(), Some(2));
}

#[test]
fn sweep_threshold_and_optimize_run() {
    let o = run(&["sweep", "--axis", "delta", "--from", "0", "--to", "0.2", "--points", "3", "--theta", "0.3"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).lines().count(), 4);
    let t = stdout(&run(&["threshold", "--gamma", "3", "--beta", "2", "--tau0", "1", "--taueps", "5", "--tauS", "1"]));
    assert!(field(&t, "theta_prime") < 0.0);
    let v: Value = serde_json::from_slice(&run(&["optimize", "--theta", "0.5", "--json"]).stdout).unwrap();
    assert!(v["policy"].is_object());
}

#[test]
fn quick_verification_passes_and_injected_faults_fail() {
    let o = run(&["verify", "--quick"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).trim_end().ends_with("PASS"));
    for fault in ["welfare-scale", "raw-pricing", "kappa-sign"] {
        let o = run(&["verify", "--quick", "--draws", "3", "--inject-fault", fault]);
        assert_eq!(o.status.code(), Some(1), "{fault}");
    }
}
