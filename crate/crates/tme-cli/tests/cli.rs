use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tme(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tme")).args(args).env_remove("TME_WORKERS").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn records(path: &Path) -> Vec<Value> {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_array().unwrap().clone()
}

#[test]
fn predict_prints_phase_and_record() {
    let o = tme(&["predict", "--family", "jn", "--n", "1", "--c-minus", "0.5"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("-0.0436332"));
    let json: Value = serde_json::from_str(&out[out.find('[').unwrap()..]).unwrap();
    assert_eq!(json[0]["measure"], "J1");
    assert_eq!(json[0]["schema"], 1);
}

#[test]
fn predict_flags_vanishing_phi() {
    let o = tme(&["predict", "--family", "phir", "--n", "2", "--model", "toric-code"]);
    assert!(o.status.success());
    let o = tme(&["predict", "--family", "phir", "--n", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn topology_reports_manifold() {
    let o = tme(&["topology", "--family", "phir", "--n", "2"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("is_manifold=true"));
}

#[test]
fn kitaev_point_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("k.json");
    let o = tme(&["kitaev", "--family", "jn", "--n", "1", "--ns", "4", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = records(&out);
    assert_eq!(rec.len(), 1);
    assert!(rec[0]["phase"].as_f64().unwrap() < 0.0);
    // n_s = 4 misses the 0.5% tolerance but is within a factor of two
    let strict = tme(&["compare", "--result", out.to_str().unwrap()]);
    assert_eq!(strict.status.code(), Some(1));
    assert!(stdout(&strict).contains("FAIL"));
    let loose = tme(&["compare", "--result", out.to_str().unwrap(), "--tol", "0.5"]);
    assert!(loose.status.success());
}

#[test]
fn kitaev_scan_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("scan.csv");
    let json = dir.path().join("scan.json");
    let o = tme(&[
        "kitaev", "--family", "jn", "--n", "1", "--ns", "4", "--scan", "Jx=0.4:1.0:3",
        "--csv", csv.to_str().unwrap(), "--out", json.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("Jx,") && lines[0].contains("phase_unwrapped"));
    let rec = records(&json);
    assert_eq!(rec[0]["params"]["kitaev"]["jy"], rec[0]["params"]["kitaev"]["jx"]);
}

#[test]
fn invalid_parameters_exit_two() {
    let o = tme(&["kitaev", "--family", "jn", "--ns", "4", "--jx", "0", "--jy", "0", "--jz", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tme(&["kitaev", "--family", "jn", "--ns", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tme(&["chern", "--ns", "8", "--k", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = tme(&["kitaev", "--family", "jn", "--ns", "4", "--scan", "Jx=bad"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_runs_chern() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("c.json");
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, format!("workers = 2\n[chern]\nns = 8\nn = 1\nmu = 0.4\nout = {}\n", out.display())).unwrap();
    let o = tme(&["run", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = records(&out);
    let ratio = rec[0]["phase"].as_f64().unwrap() / rec[0]["prediction"].as_f64().unwrap();
    assert!((ratio - 1.0).abs() < 0.1, "{ratio}");
    let c = tme(&["compare", "--result", out.to_str().unwrap(), "--tol", "0.1"]);
    assert!(c.status.success());
}

#[test]
fn bad_config_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "[chern]\nns = 8\nns = 10\n").unwrap();
    assert_eq!(tme(&["run", cfg.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&cfg, "[chern]\nbogus = 1\n").unwrap();
    assert_eq!(tme(&["run", cfg.to_str().unwrap()]).status.code(), Some(2));
    std::fs::write(&cfg, "[chern]\nns = 8\n[kitaev]\nns = 4\n").unwrap();
    assert_eq!(tme(&["run", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn laughlin_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("l.json");
    let bins = dir.path().join("bins.csv");
    let o = tme(&[
        "laughlin", "--measure", "smu", "--spins", "8", "--mu-grid", "0.5:1.0:2", "--sweeps", "2000",
        "--burn-in", "200", "--bins", "8", "--rotations", "2", "--out", out.to_str().unwrap(),
        "--bins-csv", bins.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = records(&out);
    assert_eq!(rec.len(), 2);
    assert_eq!(rec[0]["seed"], 1);
    assert!(rec[0]["stderr"].as_f64().unwrap() > 0.0);
    // 2 grid points × 2 chains × 8 bins, plus the header
    assert_eq!(std::fs::read_to_string(&bins).unwrap().lines().count(), 33);
}

#[test]
fn topology_accepts_r_flag() {
    let o = tme(&["topology", "--family", "phir", "--r", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn reruns_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
    for (p, w) in [(&a, "1"), (&b, "3")] {
        let o = tme(&[
            "--workers", w, "laughlin", "--spins", "8", "--sweeps", "800", "--burn-in", "100", "--bins", "8",
            "--rotations", "3", "--out", p.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    let strip = |v: Vec<Value>| -> Vec<Value> {
        v.into_iter()
            .map(|mut r| {
                r.as_object_mut().unwrap().remove("runtime_s");
                r
            })
            .collect()
    };
    assert_eq!(strip(records(&a)), strip(records(&b)));
}

#[test]
fn laughlin_rejects_odd_spin_count() {
    let o = tme(&["laughlin", "--spins", "7", "--sweeps", "100", "--bins", "4"]);
    assert_ne!(o.status.code(), Some(0));
}
