use std::path::PathBuf;
use std::process::Command;

use opsys::conic::{eig_herm, CMatrix};
use opsys::system::{random_positive, tri3, MatrixOperatorSystem};
use opsys::tensor::io::{CertificateFile, ElementFile};
use opsys::tensor::TensorSystem;
use serde_json::Value;

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn run(args: &[&str]) -> (i32, Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_opsys")).args(args).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let v = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), v, String::from_utf8(out.stderr).unwrap())
}

fn tri3_m2() -> TensorSystem {
    TensorSystem::new(&tri3(), &MatrixOperatorSystem::full(2))
}

fn write_element(name: &str, ts: &TensorSystem, shift: f64, seed: u64) -> PathBuf {
    let x = random_positive(ts.product(), 1, seed);
    let r = x.realize();
    let lmin = eig_herm(&r).unwrap().min();
    let y = ts.element(1, &(&r - &CMatrix::identity(r.rows()).scale(lmin + shift)), 1e-8).unwrap();
    let p = tmp(name);
    std::fs::write(&p, serde_json::to_string(&ElementFile::from_element(&y)).unwrap()).unwrap();
    p
}

fn path(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn min_member_answers_both_ways() {
    let ts = tri3_m2();
    let sys = tmp("tri3.json");
    std::fs::write(&sys, tri3().to_json()).unwrap();
    let m2 = tmp("m2.json");
    std::fs::write(&m2, r#"{"full": 2}"#).unwrap();
    let pos = write_element("mm_pos.json", &ts, -0.1, 1);
    let (code, v, _) = run(&["min-member", "--system", path(&sys), "--partner", path(&m2), "--element", path(&pos)]);
    assert_eq!(code, 0);
    assert_eq!(v["outcome"]["member"], true);
    assert_eq!(v["config"]["command"], "min-member");
    let neg = write_element("mm_neg.json", &ts, 0.5, 2);
    let (code, v, _) = run(&["min-member", "--system", "tri3", "--partner", "m2", "--element", path(&neg), "--states", "20"]);
    assert_eq!(code, 0);
    assert_eq!(v["outcome"]["member"], false);
    // sampling is one-sided: it may miss, but never dips below the exact spectrum
    let exact = v["outcome"]["min_eig"].as_f64().unwrap();
    assert!(exact < 0.0);
    assert!(v["outcome"]["states"]["min_eig"].as_f64().unwrap() >= exact - 1e-9);
}

#[test]
fn certify_then_verify() {
    let ts = tri3_m2();
    let x = write_element("cert_x.json", &ts, -0.05, 3);
    let cert = tmp("cert.json");
    let args = [
        "max-certify", "--system", "tri3", "--partner", "m2", "--element", path(&x), "--eps", "1e-3", "--budget", "20000", "--seed", "0",
        "--out", path(&cert),
    ];
    let (code, v, err) = run(&args);
    assert_eq!(code, 0, "{err}");
    assert_eq!(v["outcome"]["certified"], true);
    assert_eq!(v["outcome"]["certificate"]["kind"], "member");

    let (code, v, _) = run(&["verify-certificate", "--certificate", path(&cert), "--element", path(&x)]);
    assert_eq!(code, 0);
    assert_eq!(v["outcome"]["valid"], true);
    let stored = v["outcome"]["stored_residual"].as_f64().unwrap();
    let recomputed = v["outcome"]["recomputed_residual"].as_f64().unwrap();
    assert!((stored - recomputed).abs() <= 1e-10);

    // an indefinite P must be caught
    let mut c = CertificateFile::from_json(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    let k3 = c.atoms[0].k * 3;
    for i in 0..k3 {
        c.atoms[0].p[i * k3 + i][0] -= 10.0;
    }
    let bad = tmp("cert_bad.json");
    std::fs::write(&bad, c.to_json()).unwrap();
    let (code, v, _) = run(&["verify-certificate", "--certificate", path(&bad)]);
    assert_eq!(code, 0);
    assert_eq!(v["outcome"]["valid"], false);
}

#[test]
fn reports_are_reproducible() {
    let ts = tri3_m2();
    let x = write_element("repro_x.json", &ts, -0.05, 4);
    let args = ["max-certify", "--system", "tri3", "--partner", "m2", "--element", path(&x), "--seed", "7"];
    let (_, mut a, _) = run(&args);
    let (_, mut b, _) = run(&args);
    a.as_object_mut().unwrap().remove("wall_time_ms");
    b.as_object_mut().unwrap().remove("wall_time_ms");
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn budget_exhaustion_exits_with_three() {
    let ts = TensorSystem::new(&tri3(), &tri3());
    let x = write_element("budget_x.json", &ts, 0.3, 5);
    let (code, v, _) = run(&["max-certify", "--system", "tri3", "--partner", "tri3", "--element", path(&x), "--budget", "1"]);
    assert_eq!(code, 3);
    assert_eq!(v["outcome"]["certificate"]["kind"], "fail");
}

#[test]
fn refutation_of_a_min_negative_element() {
    let ts = TensorSystem::new(&tri3(), &tri3());
    let x = write_element("refute_x.json", &ts, 0.3, 6);
    let out = tmp("refute_cert.json");
    let (code, v, err) = run(&["max-refute", "--system", "tri3", "--partner", "tri3", "--element", path(&x), "--out", path(&out)]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(v["outcome"]["found"], true);
    assert!(v["outcome"]["label"].as_str().unwrap().starts_with("evidence"));
    let (_, v, _) = run(&["verify-certificate", "--certificate", path(&out)]);
    assert_eq!(v["outcome"]["valid"], true);
}

#[test]
fn malformed_input_exits_with_two() {
    let bad = tmp("bad_element.json");
    std::fs::write(&bad, "{\"level\": 1, \"matrix\": [[1, 0]]}").unwrap();
    let (code, _, err) = run(&["min-member", "--system", "tri3", "--partner", "m2", "--element", path(&bad)]);
    assert_eq!(code, 2);
    assert!(err.contains("opsys:"));
    let (code, _, _) = run(&["min-member", "--system", "nonsense", "--partner", "m2", "--element", path(&bad)]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["s0-demo", "--N", "1"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["no-such-command"]);
    assert_eq!(code, 2);
}

#[test]
fn check_cp_on_map_files() {
    let id = opsys::maps::SystemMap::identity(&tri3());
    let p = tmp("id_tri3.json");
    std::fs::write(&p, id.to_json()).unwrap();
    let (code, v, _) = run(&["check-cp", "--map", path(&p)]);
    assert_eq!(code, 0);
    assert_eq!(v["outcome"]["cp"], true);
    let m2 = MatrixOperatorSystem::full(2);
    let t = opsys::maps::SystemMap::from_fn(&m2, &m2, |x| x.transpose()).unwrap();
    let p = tmp("transpose.json");
    std::fs::write(&p, t.to_json()).unwrap();
    let (_, v, _) = run(&["check-cp", "--map", path(&p)]);
    assert_eq!(v["outcome"]["cp"], false);
}

#[test]
fn factorize_identity_on_m2() {
    let (code, v, err) = run(&["factorize", "--identity", "m2", "--eps", "1e-1,1e-2,1e-3"]);
    assert_eq!(code, 0, "{err}");
    let steps = v["outcome"]["steps"].as_array().unwrap();
    assert_eq!(steps.len(), 3);
    for (s, eps) in steps.iter().zip([1e-1, 1e-2, 1e-3]) {
        assert!(s["max_error"].as_f64().unwrap() <= eps + 1e-6);
    }
    assert_eq!(v["outcome"]["audit"]["all_within_bound"], true);
    let (code, _, _) = run(&["factorize", "--identity", "tri3"]);
    assert_eq!(code, 3);
}

#[test]
fn nuclearity_for_m2() {
    let (code, v, err) = run(&["nuclearity", "--system", "m2", "--partner", "tri3", "--partner", "m2", "--n-max", "1"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(v["outcome"]["verdict"]["verdict"], "consistent_with_nuclear");
}

#[test]
fn s0_demo_corner_errors_vanish() {
    let (code, v, _) = run(&["s0-demo", "--N", "16", "--samples", "40"]);
    assert_eq!(code, 0);
    assert_eq!(v["config"]["N"], 16);
    let errs = v["outcome"]["curves"][0]["errors"].as_array().unwrap();
    assert!(errs[2..].iter().all(|e| e.as_f64().unwrap() <= 1e-12));
    assert!(v["wall_time_ms"].is_u64());
}
