use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn nscascade(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nscascade"))
        .current_dir(dir)
        .args(args)
        .env_remove("NSCASCADE_SEED")
        .env_remove("NSCASCADE_THREADS")
        .env_remove("NSCASCADE_CONFIG")
        .env_remove("NSCASCADE_OUT")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

const WARMUP: &str = r#"{"version":1,"seed":42,"a":1.0,"b":[0,0,1],"u0":{"re":[1,0,0],"im":[0,0.5,0]},
 "lattice":{"xi":[[0.6,0,0.8],[1.2,0,1.6]],"t":[0.25,1.0]},"replicates":5000}"#;

const NS: &str = r#"{"version":1,"cascade":{"nu":0.8,"kernel":{"descriptor":{"kind":"riesz3d"},"standardize":true},
 "initial":{"kind":"kernel_multiple","re":[0.5,0.2,0],"im":[0,0.1,0.2]}},
 "lattice":{"xi":[[0,0,1],[1,1,0],[0,0,0]],"t":[0.5]},"replicates":3000}"#;

#[test]
fn linear_run_is_byte_identical_across_repeats_and_threads() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "warmup.json", WARMUP);
    let a = nscascade(dir.path(), &["linear-run", "--config", "warmup.json", "--seed", "42", "--out", "a"]);
    let b = nscascade(dir.path(), &["linear-run", "--config", "warmup.json", "--seed", "42", "--out", "b", "--threads", "1"]);
    assert!(a.status.success() && b.status.success());
    for f in ["linear.csv", "manifest.json"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap());
    }
    let c = nscascade(dir.path(), &["linear-run", "--config", "warmup.json", "--seed", "43", "--out", "c"]);
    assert!(c.status.success());
    assert_ne!(fs::read(dir.path().join("a/linear.csv")).unwrap(), fs::read(dir.path().join("c/linear.csv")).unwrap());
}

#[test]
fn manifest_round_trip_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "ns.json", NS);
    let first = nscascade(dir.path(), &["ns-run", "--config", "ns.json", "--seed", "7", "--out", "first"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let again = nscascade(dir.path(), &["ns-run", "--config", "first/manifest.json", "--out", "again"]);
    assert!(again.status.success());
    assert_eq!(fs::read(dir.path().join("first/estimates.csv")).unwrap(), fs::read(dir.path().join("again/estimates.csv")).unwrap());
    assert_eq!(fs::read(dir.path().join("first/manifest.json")).unwrap(), fs::read(dir.path().join("again/manifest.json")).unwrap());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("first/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config"]["seed"], 7);
    assert_eq!(manifest["subcommand"], "ns-run");
    // a manifest from another subcommand is rejected
    let wrong = nscascade(dir.path(), &["ns-steady", "--config", "first/manifest.json", "--out", "x"]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn zero_frequency_rows_are_exact() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "ns.json", NS);
    assert!(nscascade(dir.path(), &["ns-run", "--config", "ns.json", "--out", "o"]).status.success());
    let text = fs::read_to_string(dir.path().join("o/estimates.csv")).unwrap();
    let row = text.lines().find(|l| l.starts_with("0,0,0,")).unwrap();
    let cells: Vec<&str> = row.split(',').collect();
    assert!(cells[4..16].iter().all(|c| *c == "0"), "{row}");
}

#[test]
fn environment_supplies_the_seed() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "warmup.json", WARMUP);
    let flag = nscascade(dir.path(), &["linear-run", "--config", "warmup.json", "--seed", "5", "--out", "flag"]);
    let env = Command::new(env!("CARGO_BIN_EXE_nscascade"))
        .current_dir(dir.path())
        .args(["linear-run", "--out", "env"])
        .env("NSCASCADE_SEED", "5")
        .env("NSCASCADE_CONFIG", "warmup.json")
        .output()
        .unwrap();
    assert!(flag.status.success() && env.status.success());
    assert_eq!(fs::read(dir.path().join("flag/linear.csv")).unwrap(), fs::read(dir.path().join("env/linear.csv")).unwrap());
}

#[test]
fn malformed_configs_name_the_offending_key() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "typo.json", &NS.replace("\"standardize\"", "\"standardise\""));
    let out = nscascade(dir.path(), &["ns-run", "--config", "typo.json"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cascade.kernel.standardise"), "{err}");

    write(dir.path(), "v2.json", &NS.replace("\"version\":1", "\"version\":2"));
    let out = nscascade(dir.path(), &["ns-run", "--config", "v2.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("version"));

    let out = nscascade(dir.path(), &["ns-run"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes_separate_validation_from_runtime_failures() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "kv.json", r#"{"version":1,"kernel":{"descriptor":{"kind":"riesz3d"},"standardize":true}}"#);
    let ok = nscascade(dir.path(), &["kernel-verify", "--config", "kv.json", "--out", "kv"]);
    assert_eq!(ok.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("kv/certification.json")).unwrap()).unwrap();
    assert!((report["max_ratio"].as_f64().unwrap() - 1.0).abs() < 0.02);

    // an unattainable tolerance fails validation
    write(
        dir.path(),
        "ineq.json",
        r#"{"version":1,"nu":1,"semigroup":[{"x":[0.3,0.2,0.1],"t":0.1,"s":0.1}],"semigroup_tolerance":1e-20}"#,
    );
    let fail = nscascade(dir.path(), &["stokes-check", "--config", "ineq.json", "--out", "sk"]);
    assert_eq!(fail.status.code(), Some(2));

    // data outside the safe regime without allow_unsafe is refused at run time
    write(dir.path(), "unsafe.json", &NS.replace("[0.5,0.2,0]", "[5.0,2.0,0]"));
    let err = nscascade(dir.path(), &["ns-run", "--config", "unsafe.json", "--out", "u"]);
    assert_eq!(err.status.code(), Some(1));
}

#[test]
fn grids_flow_between_subcommands() {
    let dir = TempDir::new().unwrap();
    write(
        dir.path(),
        "project.json",
        r#"{"version":1,"velocity":{"kind":"modes","n":8,"modes":[{"k":[1,0,0],"re":[1,1,0]},{"k":[0,2,1],"re":[0,0,1],"im":[0.5,0,0]}]}}"#,
    );
    assert!(nscascade(dir.path(), &["fields-project", "--config", "project.json", "--out", "p"]).status.success());
    write(
        dir.path(),
        "evolve.json",
        r#"{"version":1,"nu":0.5,"evolve":{"initial":{"kind":"file","path":"p/projected.spgr"},"t":0.3}}"#,
    );
    let out = nscascade(dir.path(), &["stokes-eval", "--config", "evolve.json", "--out", "e"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let g = nscascade::fields::SpectralGrid::read_from(fs::File::open(dir.path().join("e/velocity.spgr")).unwrap()).unwrap();
    assert_eq!(g.dims, [8, 8, 8]);
    assert!(g.check_hermitian().is_ok());
}
