use std::fs;
use std::path::Path;

use srbp_core::cli::main_with_args;
use srbp_core::io::{Manifest, MANIFEST_NAME};

fn run(args: &[&str]) -> i32 {
    let mut v = vec!["srbp"];
    v.extend_from_slice(args);
    main_with_args(v)
}

fn out(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_owned()
}

const SIM: &[&str] = &[
    "simulate", "--dim", "3", "--n", "32", "--h", "0.5", "--T", "0.5", "--ensemble", "6", "--seed", "11",
];

fn simulate(dir: &str, extra: &[&str]) -> i32 {
    let mut a = SIM.to_vec();
    a.extend_from_slice(&["--out", dir]);
    a.extend_from_slice(extra);
    run(&a)
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != MANIFEST_NAME)
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn simulate_is_identical_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let a = out(tmp.path(), "a");
    let b = out(tmp.path(), "b");
    assert_eq!(simulate(&a, &["--threads", "1", "--views"]), 0);
    assert_eq!(simulate(&b, &["--threads", "3", "--views"]), 0);
    let oa = outputs(Path::new(&a));
    assert_eq!(oa.len(), 12);
    assert_eq!(oa, outputs(Path::new(&b)));
    let m = Manifest::read(Path::new(&a)).unwrap();
    assert!(m.complete);
    m.verify(Path::new(&a)).unwrap();
}

#[test]
fn existing_output_is_refused_without_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let a = out(tmp.path(), "a");
    assert_eq!(simulate(&a, &[]), 0);
    assert_eq!(simulate(&a, &[]), 1);
    assert_eq!(simulate(&a, &["--resume"]), 0);
}

#[test]
fn resume_regenerates_missing_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let a = out(tmp.path(), "a");
    assert_eq!(simulate(&a, &[]), 0);
    let before = outputs(Path::new(&a));
    fs::remove_file(Path::new(&a).join("traj_00003.csv")).unwrap();
    assert_eq!(simulate(&a, &["--resume"]), 0);
    assert_eq!(outputs(Path::new(&a)), before);
}

#[test]
fn resume_with_a_different_config_is_an_integrity_error() {
    let tmp = tempfile::tempdir().unwrap();
    let a = out(tmp.path(), "a");
    assert_eq!(simulate(&a, &[]), 0);
    assert_eq!(simulate(&a, &["--resume", "--dt", "0.02"]), 3);
}

#[test]
fn tampered_input_is_an_integrity_error() {
    let tmp = tempfile::tempdir().unwrap();
    let a = out(tmp.path(), "a");
    assert_eq!(simulate(&a, &[]), 0);
    let p = Path::new(&a).join("traj_00001.csv");
    let mut bytes = fs::read(&p).unwrap();
    let last = bytes.len() - 2;
    bytes[last] = if bytes[last] == b'1' { b'2' } else { b'1' };
    fs::write(&p, bytes).unwrap();
    let e = out(tmp.path(), "e");
    assert_eq!(run(&["estimate", "--input", &a, "--out", &e]), 3);
}

#[test]
fn estimate_writes_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let a = out(tmp.path(), "a");
    let sim = [
        "simulate", "--dim", "3", "--n", "32", "--h", "0.5", "--T", "2", "--ensemble", "60", "--seed", "2",
        "--record-stride", "5", "--out", &a,
    ];
    assert_eq!(run(&sim), 0);
    let e = out(tmp.path(), "e");
    let code = run(&["estimate", "--input", &a, "--out", &e, "--bootstrap", "50"]);
    assert!(code == 0 || code == 2, "exit {code}");
    for f in ["msd.csv", "reports.json"] {
        assert!(Path::new(&e).join(f).exists(), "{f}");
    }
    let msd = fs::read_to_string(Path::new(&e).join("msd.csv")).unwrap();
    assert!(msd.lines().count() > 10);
    Manifest::read(Path::new(&e)).unwrap().verify(Path::new(&e)).unwrap();
}

#[test]
fn usage_and_invalid_input_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["simulate", "--no-such-flag"]), 1);
    assert_eq!(run(&["frobnicate"]), 1);
    let a = out(tmp.path(), "a");
    assert_eq!(run(&["field", "--dim", "2", "--out", &a]), 1);
    let b = out(tmp.path(), "b");
    assert_eq!(simulate(&b, &["--threads", "0"]), 1);
    let c = out(tmp.path(), "c");
    assert_eq!(simulate(&c, &["--set", "no_such_key=1"]), 1);
    let d = out(tmp.path(), "d");
    assert_eq!(run(&["estimate", "--input", &out(tmp.path(), "missing"), "--out", &d]), 1);
}

#[test]
fn config_layers_resolve_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.conf");
    fs::write(&cfg, "# smoke\ndim = 3\nn = 32\nh = 0.5\nhorizon = 0.2\nensemble = 3\nseed = 4\n").unwrap();
    let a = out(tmp.path(), "a");
    let c = cfg.to_str().unwrap();
    assert_eq!(run(&["simulate", "--config", c, "--set", "ensemble=2", "--seed", "9", "--out", &a]), 0);
    let m = Manifest::read(Path::new(&a)).unwrap();
    assert_eq!(m.master_seed, 9);
    assert_eq!(outputs(Path::new(&a)).len(), 2);

    let json = tmp.path().join("run.json");
    fs::write(&json, r#"{"dim": 3, "n": 32, "h": 0.5, "horizon": 0.2, "ensemble": 1}"#).unwrap();
    let b = out(tmp.path(), "b");
    assert_eq!(run(&["simulate", "--config", json.to_str().unwrap(), "--out", &b]), 0);
    assert_eq!(outputs(Path::new(&b)).len(), 1);
}

#[test]
fn chaos_rho2_writes_json() {
    let tmp = tempfile::tempdir().unwrap();
    let a = out(tmp.path(), "a");
    assert_eq!(run(&["chaos", "rho2", "--dim", "3", "--out", &a]), 0);
    let text = fs::read_to_string(Path::new(&a).join("rho2.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!((v["value"].as_f64().unwrap() - 5.249870).abs() < 1e-6);
    let b = out(tmp.path(), "b");
    assert_eq!(run(&["chaos", "rho2", "--convention", "derivation", "--out", &b]), 0);
    let text = fs::read_to_string(Path::new(&b).join("rho2.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert!((v["value"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-9);
}

#[test]
fn field_command_reports_and_snapshots() {
    let tmp = tempfile::tempdir().unwrap();
    let a = out(tmp.path(), "a");
    let args = [
        "field", "--n", "32", "--h", "0.5", "--samples", "120", "--snapshots", "2", "--seed", "3", "--out", &a,
    ];
    let code = run(&args);
    assert!(code == 0 || code == 2, "exit {code}");
    let dir = Path::new(&a);
    assert!(dir.join("field_report.json").exists());
    let f = srbp_core::ScalarField::read_snapshot(&dir.join("field_00001.bin")).unwrap();
    assert_eq!(f.grid.n, 32);
}
