use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn specs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../specs")
}

fn allocsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_allocsim")).args(args).env_remove("ALLOCSIM_THREADS").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn spec(name: &str) -> String {
    specs().join(name).to_string_lossy().into_owned()
}

fn limit_value(out: &str) -> f64 {
    let line = out.lines().find(|l| l.starts_with("limit")).unwrap();
    line.split_whitespace().nth(1).unwrap().parse().unwrap()
}

#[test]
fn limits_of_reference_specs() {
    for (file, want) in [("efron.toml", 0.5), ("eth.toml", 0.308538), ("dawd.toml", 0.566667)] {
        let o = allocsim(&["limit", &spec(file)]);
        assert!(o.status.success(), "{file}: {}", stderr(&o));
        let got = limit_value(&stdout(&o));
        assert!((got - want).abs() < 5e-7, "{file}: {got}");
    }
}

#[test]
fn stratified_limit_prints_matrix() {
    let o = allocsim(&["limit", &spec("rdbcd.toml")]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("0.400000  0.600000"), "{out}");
    assert!(out.contains("0.500000  0.700000"), "{out}");
    assert!((limit_value(&out) - 0.55).abs() < 1e-6);
}

#[test]
fn simulate_writes_summary_with_resolved_spec() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = allocsim(&[
        "simulate",
        &spec("efron.toml"),
        "--out",
        out.to_str().unwrap(),
        "--reps",
        "20",
        "--horizon",
        "1001",
        "--set",
        "design.p=0.9",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
    assert!(stdout(&o).starts_with("Efron: limit 0.500000"));
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["limit"]["scalar"], 0.5);
    assert_eq!(doc["spec"]["design"]["p"], 0.9);
    assert_eq!(doc["spec"]["run"]["reps"], 20);
    assert_eq!(doc["spec"]["run"]["horizon"], 1001);
    assert_eq!(doc["summary"]["replications"], 20);
    let csv = std::fs::read_to_string(out.join("trajectory_000.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("# schema_version: 1"));
    assert_eq!(lines.next(), Some("step,arm_or_stratum,pi,martingale"));
    assert!(csv.lines().last().unwrap().starts_with("1001,arm1,"));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let args = |threads: &'static str| {
        vec![
            "simulate".to_string(),
            spec("dbcd.toml"),
            "--out".into(),
            out.to_string_lossy().into_owned(),
            "--seed".into(),
            "7".into(),
            "--reps".into(),
            "12".into(),
            "--horizon".into(),
            "2000".into(),
            "--threads".into(),
            threads.into(),
        ]
    };
    let read = || {
        ["summary.json", "trajectory_000.csv"].map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let run = |a: Vec<String>| {
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        let o = allocsim(&a);
        assert!(o.status.success(), "{}", stderr(&o));
        stdout(&o)
    };
    let v1 = run(args("1"));
    let first = read();
    let v2 = run(args("3"));
    assert_eq!(v1, v2);
    assert_eq!(first, read());
}

#[test]
fn json_trajectories_and_json_input() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ps");
    let o = allocsim(&[
        "simulate",
        &spec("pocock_simon.json"),
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
        "--reps",
        "10",
        "--set",
        "run.trajectories=2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let t: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("trajectories.json")).unwrap()).unwrap();
    assert_eq!(t["schema_version"], 1);
    assert_eq!(t["trajectories"].as_array().unwrap().len(), 2);
    assert!(!out.join("trajectory_000.csv").exists());
}

#[test]
fn missing_model_section_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ra.toml");
    std::fs::write(&path, "[design]\nkind = \"ERADE\"\nalpha = 0.4\n").unwrap();
    let out = dir.path().join("out");
    let o = allocsim(&["simulate", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("[model]"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn unknown_field_reports_path() {
    let o = allocsim(&["limit", &spec("efron.toml"), "--set", "run.horizn=5"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("run"), "{}", stderr(&o));
    assert!(stderr(&o).contains("horizn"), "{}", stderr(&o));
}

#[test]
fn failed_run_removes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    // a directory in the way of the trajectory file makes the second write fail
    std::fs::create_dir_all(out.join("trajectory_000.csv/blocker")).unwrap();
    let o = allocsim(&["simulate", &spec("efron.toml"), "--out", out.to_str().unwrap(), "--reps", "5"]);
    assert!(!o.status.success());
    assert!(!out.join("summary.json").exists());
    let leftovers: Vec<_> = std::fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers, vec![std::ffi::OsString::from("trajectory_000.csv")]);
}

#[test]
fn verify_exit_codes() {
    let o = allocsim(&["verify", &spec("efron.toml")]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));

    let o = allocsim(&["verify", &spec("increasing.toml")]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    let fail = out.lines().find(|l| l.contains("FAIL") && l.contains("nonincreasing")).unwrap();
    assert!(!fail.is_empty());
    assert!(out.contains("witness:"));

    let o = allocsim(&["verify", &spec("dbcd.toml")]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).matches("PASS").count(), 6);
}

#[test]
fn verify_writes_report_when_asked() {
    let dir = tempfile::tempdir().unwrap();
    let o = allocsim(&["verify", &spec("rdbcd.toml"), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(doc["report"]["design"], "RDBCD");
    assert_eq!(doc["spec"]["design"]["kind"], "RDBCD");
}

#[test]
fn list_designs_catalogue() {
    let o = allocsim(&["list-designs"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split_whitespace().collect()).collect();
    assert!(rows.len() >= 15);
    assert!(rows.iter().any(|r| r[0] == "ERADE" && r[1] == "RA"));
    assert!(rows.iter().any(|r| r[0] == "PocockSimon" && r[1] == "CA"));

    let o = allocsim(&["list-designs", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.as_array().unwrap().len() >= 15);
}

#[test]
fn threads_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_allocsim"))
        .args(["limit", &spec("efron.toml")])
        .env("ALLOCSIM_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_allocsim"))
        .args(["limit", &spec("efron.toml")])
        .env("ALLOCSIM_THREADS", "many")
        .output()
        .unwrap();
    assert!(!o.status.success());
}
