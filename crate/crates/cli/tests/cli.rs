use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hyperperc"))
}

fn write_config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(args: &[&str], config: Option<&Path>) -> Output {
    let mut cmd = bin();
    cmd.args(args);
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TREE: &str = r#"{
  "graph": {"family": "tree", "k": 3},
  "radius": 5,
  "p": 0.3,
  "estimators": [{"name": "two_point", "distances": [0, 1, 2]}],
  "n_samples": 1000,
  "seed": 1
}"#;

#[test]
fn percolate_writes_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "tree.json", TREE);
    let o = run(&["percolate"], Some(&cfg));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("experiment,config_hash,estimator"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.starts_with("tree,")));
}

#[test]
fn output_is_byte_identical_across_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "tree.json", TREE);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let o = run(&["--threads", "1", "percolate", "--out", a.to_str().unwrap()], Some(&cfg));
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["--threads", "3", "percolate", "--out", b.to_str().unwrap()], Some(&cfg));
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn seed_override_changes_estimates() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "tree.json", TREE);
    let a = run(&["percolate"], Some(&cfg));
    let b = run(&["--seed", "2", "percolate"], Some(&cfg));
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
}

#[test]
fn out_of_range_p_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.json", &TREE.replace("0.3", "1.5"));
    let o = run(&["percolate"], Some(&cfg));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("p:"), "{}", stderr(&o));
}

#[test]
fn unknown_field_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "bad.json", &TREE.replace("\"seed\"", "\"sede\": 3, \"seed\""));
    let o = run(&["percolate"], Some(&cfg));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("sede"), "{}", stderr(&o));
}

#[test]
fn too_many_samples_is_a_resource_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "big.json", &TREE.replace("1000", "100000000000"));
    let o = run(&["percolate"], Some(&cfg));
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
}

#[test]
fn grid_above_critical_estimate_is_a_contract_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "sweep.json",
        r#"{"graph": {"family": "tree", "k": 3}, "radius": 4, "p_grid": [0.2, 0.45], "pc_hat": 0.4, "n_samples": 100, "seed": 1}"#,
    );
    let o = run(&["sweep"], Some(&cfg));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn sweep_writes_one_row_per_grid_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "sweep.json",
        r#"{"graph": {"family": "tree", "k": 3}, "radius": 4, "p_grid": [0.2, 0.3], "n_samples": 200, "seed": 1}"#,
    );
    let o = run(&["sweep"], Some(&cfg));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("experiment,config_hash,family,p,"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn generate_then_norms_from_window_file() {
    let dir = TempDir::new().unwrap();
    let gen = write_config(&dir, "gen.json", r#"{"graph": {"family": "tree", "k": 3}, "radius": 3, "seed": 0, "out": "window.json"}"#);
    let o = run(&["generate"], Some(&gen));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("window.json").exists());
    let norms = write_config(
        &dir,
        "norms.json",
        r#"{"window_file": "window.json", "p": 0.3, "quantities": [{"name": "norm1"}, {"name": "norm2"}], "source": "exact", "seed": 0}"#,
    );
    let o = run(&["norms"], Some(&norms));
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().next().unwrap().starts_with("experiment,config_hash,quantity"));
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn magic_on_tiling_vertices() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "magic.json", r#"{"graph": {"family": "tiling", "p": 3, "q": 7}, "radius": 2, "epsilon": 0.5, "seed": 4}"#);
    let o = run(&["magic"], Some(&cfg));
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["model"], "graph");
    assert!(!v["selected"].as_array().unwrap().is_empty());
}

#[test]
fn verify_oracles_passes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("report.json");
    let o = run(&["verify", "oracles", "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(out).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["n_failed"], 0);
}

#[test]
fn verify_unknown_suite_is_a_schema_error() {
    let o = run(&["verify", "bogus"], None);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn injected_fault_fails_the_named_check() {
    let o = run(&["verify", "oracles", "--only", "susceptibility_pc_identity", "--inject-fault", "susceptibility_pc_identity"], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("susceptibility_pc_identity"), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["checks"][0]["name"], "susceptibility_pc_identity");
    assert_eq!(v["checks"][0]["passed"], false);
}
