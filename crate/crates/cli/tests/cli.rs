use std::path::Path;
use std::process::{Command, Output};

use isingcomp::io;

fn isingcomp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isingcomp"))
        .args(args)
        .env_remove("ISINGCOMP_DATASET")
        .env_remove("ISINGCOMP_MODEL")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = isingcomp(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_dataset(dir: &Path) {
    ok(&[
        "gen",
        "--sizes",
        "3..7",
        "--per-config",
        "4",
        "--seed",
        "3",
        "--out",
        s(dir),
    ]);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(isingcomp(&[]).status.code(), Some(2));
    assert_eq!(isingcomp(&["compress", "--in", "x.json"]).status.code(), Some(2));
    assert_eq!(
        isingcomp(&["gen", "--sizes", "9..3", "--out", "x"]).status.code(),
        Some(2)
    );
    assert_eq!(isingcomp(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn module_errors_exit_1_with_one_line() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("missing.json");
    let out = isingcomp(&["label", "--in", s(&missing), "--out", s(&tmp.path().join("o.json"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");

    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, r#"{"n":2,"h":[0,0],"J":[[1,1,1.0]]}"#).unwrap();
    let out = isingcomp(&["label", "--in", s(&bad), "--out", s(&tmp.path().join("o.json"))]);
    assert_eq!(out.status.code(), Some(1));

    let g = tmp.path().join("g.json");
    std::fs::write(&g, "{\"n\":2,\"h\":[0.0,0.0],\"J\":[[1,2,1.0]]}\n").unwrap();
    let out = isingcomp(&[
        "baseline",
        "--in",
        s(&g),
        "--target-nodes",
        "0.1",
        "--out",
        s(&tmp.path().join("b")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn label_writes_loadable_instance_and_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let g = tmp.path().join("g.json");
    std::fs::write(&g, "{\"n\":3,\"h\":[0.5,0.0,0.0],\"J\":[[1,2,1.0],[2,3,-2.0]]}\n").unwrap();
    let out = tmp.path().join("labeled.json");
    let stdout = ok(&["label", "--in", s(&g), "--out", s(&out)]);
    assert!(stdout.contains("E_min = -3.5"), "{stdout}");
    let inst = io::read_labeled(&out).unwrap();
    assert_eq!(inst.labels.len(), 3);
    assert!(tmp.path().join("labeled.json.run.json").exists());
}

#[test]
fn compress_solve_lift_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data);
    let model = tmp.path().join("model");
    ok(&[
        "train",
        "--dataset",
        s(&data),
        "--epochs",
        "3",
        "--layers",
        "2",
        "--out",
        s(&model),
    ]);
    let graph = data.join("instances").join("er-n07-p1.0000-000.json");
    let cmp = tmp.path().join("cmp");
    ok(&[
        "compress",
        "--model",
        s(&model.join("checkpoint.json")),
        "--in",
        s(&graph),
        "--target-nodes",
        "0.5",
        "--out",
        s(&cmp),
    ]);
    for f in ["reduced.json", "log.json", "trace.csv", "run.json"] {
        assert!(cmp.join(f).exists(), "{f}");
    }
    let reduced = io::read_graph(&cmp.join("reduced.json")).unwrap();
    assert!(reduced.spin_count() <= 3);

    let sol = tmp.path().join("sol");
    ok(&[
        "solve",
        "--in",
        s(&cmp.join("reduced.json")),
        "--log",
        s(&cmp.join("log.json")),
        "--out",
        s(&sol),
    ]);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sol.join("solution.json")).unwrap()).unwrap();
    let lifted: isingcomp::SpinAssignment = v["lifted"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| (p[0].as_u64().unwrap() as u32, p[1].as_i64().unwrap() as i8))
        .collect();
    let original = io::read_labeled(&graph).unwrap().graph;
    let e = original.energy(&lifted).unwrap();
    assert!((e - v["energy"].as_f64().unwrap()).abs() < 1e-9);
}

#[test]
fn sat2ising_reports_all_sat_equal() {
    let tmp = tempfile::tempdir().unwrap();
    let cnf = tmp.path().join("f.cnf");
    std::fs::write(&cnf, "c example\np cnf 2 1\n1 2 0\n").unwrap();
    let out = tmp.path().join("f.json");
    let stdout = ok(&["sat2ising", "--in", s(&cnf), "--check", "1,2", "--out", s(&out)]);
    assert!(stdout.contains("all-sat-equal(1, 2): no"), "{stdout}");
    let stdout = ok(&[
        "sat2ising",
        "--in",
        s(&cnf),
        "--gadget",
        "1,2",
        "--check",
        "1,2",
        "--out",
        s(&out),
    ]);
    assert!(stdout.contains("all-sat-equal(1, 2): yes"), "{stdout}");
    let g = io::read_graph(&out).unwrap();
    assert_eq!(isingcomp::Oracle::default().min_energy(&g).unwrap(), 0.0);
}

#[test]
fn grad_check_passes_on_small_model() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    small_dataset(&data);
    let out = tmp.path().join("gc");
    ok(&[
        "grad-check",
        "--dataset",
        s(&data),
        "--points",
        "2",
        "--graphs",
        "2",
        "--layers",
        "1",
        "--out",
        s(&out),
    ]);
    assert!(out.join("gradcheck.json").exists());
}
