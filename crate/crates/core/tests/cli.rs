use std::path::Path;
use std::process::{Command, Output};

fn rsos(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rsos"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn digests(dir: &Path, experiment: &str) -> Vec<(String, String)> {
    let text = std::fs::read_to_string(dir.join(format!("{experiment}-manifest.json"))).unwrap();
    let m: serde_json::Value = serde_json::from_str(&text).unwrap();
    m["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| {
            let name = Path::new(o["path"].as_str().unwrap()).file_name().unwrap();
            (name.to_string_lossy().into_owned(), o["sha256"].as_str().unwrap().to_string())
        })
        .collect()
}

#[test]
fn same_seed_gives_identical_reports_for_any_worker_count() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["duality-check", "--seed", "42", "--replications", "60"];
    let ra = rsos(&[&args[..], &["--jobs", "1"]].concat(), a.path());
    let rb = rsos(&[&args[..], &["--jobs", "3"]].concat(), b.path());
    assert!(ra.status.success(), "{}", String::from_utf8_lossy(&ra.stderr));
    assert!(rb.status.success());
    let (da, db) = (digests(a.path(), "duality-check"), digests(b.path(), "duality-check"));
    assert!(!da.is_empty());
    assert_eq!(da, db);
    let stdout = String::from_utf8(ra.stdout).unwrap();
    assert!(stdout.contains("[PASS] pathwise duality"), "{stdout}");
}

#[test]
fn different_seeds_give_different_rings() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    rsos(&["variance", "--seed", "1", "--replications", "20", "--jobs", "1"], a.path());
    rsos(&["variance", "--seed", "2", "--replications", "20", "--jobs", "1"], b.path());
    assert_ne!(digests(a.path(), "variance"), digests(b.path(), "variance"));
}

#[test]
fn config_file_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "experiment = variance\nreplications = 1\n").unwrap();
    let out = rsos(&["variance", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("replications"));

    std::fs::write(&cfg, "experiment = growth\n").unwrap();
    let out = rsos(&["variance", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("experiment"));

    let missing = dir.path().join("nope.conf");
    let out = rsos(&["variance", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.conf"));
}

#[test]
fn dual_run_writes_its_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = rsos(&["dual-run", "--t", "8", "--seed", "3"], dir.path());
    assert!(out.status.success());
    let traj = std::fs::read_to_string(dir.path().join("dual-trajectory.csv")).unwrap();
    assert!(traj.lines().count() > 1);
    assert!(dir.path().join("dual-hitting.csv").exists());
}
