use std::path::PathBuf;
use std::process::{Command, Output};

use sdre::ansatz::{Certificate, Status};
use sdre::suite::SuiteReport;
use sdre::tensor::MatrixDump;

fn sdre(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdre"))
        .args(args)
        .env_remove("SDRE_SEED")
        .env_remove("SDRE_SAMPLES")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("sdre-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn full_run_at_n2_passes() {
    let o = sdre(&["verify", "all", "--n", "2", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    for suite in ["consistency", "sdre", "trace-commute", "extension"] {
        assert!(out.lines().any(|l| l.starts_with(suite) && l.ends_with("PASS")), "{suite}");
    }
}

#[test]
fn naive_extension_fails_with_witness() {
    let o = sdre(&["verify", "sdre", "--family", "acf-spectral", "--k", "IIa-naive", "--samples", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("first failure: sdre[IIa-naive]: index"), "{out}");
}

#[test]
fn perturbed_run_fails() {
    let o = sdre(&["verify", "param", "--n", "2", "--samples", "3", "--perturb"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn configuration_errors_exit_2() {
    assert_eq!(sdre(&["verify", "bogus"]).status.code(), Some(2));
    assert_eq!(sdre(&["verify", "sdre", "--n", "1"]).status.code(), Some(2));
    assert_eq!(sdre(&["verify", "sdre", "--family", "trig"]).status.code(), Some(2));
    assert_eq!(sdre(&["verify", "sdre", "--family", "acf-constant", "--k", "IIa-naive"]).status.code(), Some(2));
    assert_eq!(sdre(&["dump", "matrix", "--family", "acf-constant", "--name", "Z", "--n", "2"]).status.code(), Some(2));
    assert_eq!(sdre(&["solve", "extension", "--base", "III", "--n", "2"]).status.code(), Some(2));
}

#[test]
fn dump_round_trips() {
    let o = sdre(&["dump", "matrix", "--family", "acf-constant", "--name", "D", "--n", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let got: MatrixDump = serde_json::from_slice(&o.stdout).unwrap();
    let want = sdre::structure::acf_constant(2).unwrap().d.dump().unwrap();
    assert_eq!(got, want);
    assert_eq!((got.arity, got.n), (2, 2));

    let o = sdre(&["dump", "matrix", "--family", "k", "--tag", "IIb", "--spectral", "--n", "3"]);
    let k: MatrixDump = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(k.spectral.get("1").map(String::as_str), Some("u1"));
    let o = sdre(&["dump", "matrix", "--name", "R0", "--n", "2"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn reports_are_byte_deterministic() {
    let dir = scratch("det");
    let (a, b) = (dir.join("a.json"), dir.join("b.json"));
    for p in [&a, &b] {
        let o = sdre(&["verify", "sdre", "--n", "2", "--samples", "4", "--seed", "7", "--out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    let r: SuiteReport = serde_json::from_slice(&x).unwrap();
    assert_eq!((r.suite.as_str(), r.n, r.seed, r.samples, r.pass), ("sdre", 2, 7, 4, true));
    let text = String::from_utf8(x).unwrap();
    let body = &text[text.find("\"reports\"").unwrap()..];
    let at: Vec<usize> = ["identity", "family", "n", "seed", "samples", "pass", "failures"]
        .iter()
        .map(|k| body.find(&format!("\"{k}\":")).unwrap())
        .collect();
    assert!(at.windows(2).all(|w| w[0] < w[1]), "{at:?}");
}

#[test]
fn several_runs_write_one_file_each() {
    let dir = scratch("multi").join("out");
    let o = sdre(&["verify", "ybe", "--n", "2,3", "--samples", "2", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.join("ybe-n2-seed1.json").exists());
    assert!(dir.join("ybe-n3-seed1.json").exists());
}

#[test]
fn environment_overrides_seed_and_samples() {
    let dir = scratch("env");
    let p = dir.join("r.json");
    let o = Command::new(env!("CARGO_BIN_EXE_sdre"))
        .args(["verify", "gnf", "--family", "acf-constant", "--out", p.to_str().unwrap()])
        .env("SDRE_SEED", "5")
        .env("SDRE_SAMPLES", "3")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let r: SuiteReport = serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
    assert_eq!((r.seed, r.samples), (5, 3));
}

#[test]
fn extension_certificate() {
    let dir = scratch("cert");
    let p = dir.join("cert.json");
    let args = ["solve", "extension", "--base", "IIb", "--n", "2", "--order", "1", "--degree", "2", "--seed", "7"];
    let o = sdre(&[&args[..], &["--out", p.to_str().unwrap()]].concat());
    assert_eq!(o.status.code(), Some(0));
    let c: Certificate = serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
    assert_eq!((c.base.as_str(), c.n, c.order, c.status), ("IIb", 2, 1, Status::Unique));
    assert_eq!((c.rank, c.nullity), (12, 0));
    assert!(c.solution.is_some() && !c.checked_points.is_empty());
}
