use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dexfinger"))
        .args(args)
        .env_remove("UCM_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

#[test]
fn ucm_report_defaults() {
    let o = run(&["ucm-report", "--config", "default"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("rank          3"), "{text}");
    assert!(text.contains("PD            true"), "{text}");
    assert!(text.contains("tau_A         [15.125, 12.5, 8]"), "{text}");

    let o = run(&["ucm-report", "--config", "default", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rank"], 3);
    assert_eq!(v["pd"], true);
    assert_eq!(v["j_s1"], serde_json::json!([-11.0, -11.0, -11.0]));
}

#[test]
fn drive_map_modes() {
    let o = run(&["drive-map", "--a1", "1", "--a2", "-1", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["q_aa"], 0.0);
    assert_eq!(v["q_fe"], 0.541666667);
    let o = run(&["drive-map", "--a1", "60deg", "--a2", "0"]);
    assert!(
        stdout(&o).starts_with("theta1  0.283616003\n"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn zero_samples_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["workspace", "--n", "0", "--out", &path(dir.path(), "w.csv")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--n"));
}

#[test]
fn unknown_flag_exits_one() {
    let o = run(&["ucm-report", "--colour"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
}

#[test]
fn workspace_is_reproducible_and_has_a_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = path(dir.path(), "a.csv");
    let b = path(dir.path(), "b.csv");
    for (out, workers) in [(&a, "1"), (&b, "3")] {
        let o = run(&[
            "workspace",
            "--n",
            "2000",
            "--seed",
            "42",
            "--coupled",
            "--workers",
            workers,
            "--out",
            out,
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let ta = std::fs::read(&a).unwrap();
    assert_eq!(ta, std::fs::read(&b).unwrap());
    assert!(ta.starts_with(b"x_mm,y_mm,z_mm\n"));
    assert_eq!(ta.iter().filter(|c| **c == b'\n').count(), 2001);

    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{a}.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["subcommand"], "workspace");
    assert_eq!(m["seed"], 42);
    assert_eq!(m["outputs"][0], a.as_str());
    let m2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{b}.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["config_sha256"], m2["config_sha256"]);
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let env = path(dir.path(), "env.csv");
    let flag = path(dir.path(), "flag.csv");
    let o = Command::new(env!("CARGO_BIN_EXE_dexfinger"))
        .args(["workspace", "--n", "50", "--project", "xoy", "--out", &env])
        .env("UCM_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    run(&[
        "workspace",
        "--n",
        "50",
        "--seed",
        "9",
        "--project",
        "xoy",
        "--out",
        &flag,
    ]);
    let text = std::fs::read_to_string(&env).unwrap();
    assert!(text.starts_with("u_mm,v_mm\n"));
    assert_eq!(text, std::fs::read_to_string(&flag).unwrap());
}

#[test]
fn envelop_writes_a_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "trace.jsonl");
    let o = run(&[
        "envelop",
        "--config",
        "grasp",
        "--sphere-d",
        "40",
        "--center",
        "33.5,27.5,0",
        "--a-max",
        "31",
        "--steps",
        "62",
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 63);
    let last = &lines[61];
    assert_eq!(last["status"], "converged");
    assert_eq!(last["contacts"].as_array().unwrap().len(), 3);
    assert_eq!(lines[62]["termination"], "completed");
    assert!(Path::new(&format!("{out}.manifest.json")).exists());

    let again = path(dir.path(), "again.jsonl");
    run(&[
        "envelop",
        "--config",
        "grasp",
        "--sphere-d",
        "40",
        "--center",
        "33.5,27.5,0",
        "--a-max",
        "31",
        "--steps",
        "62",
        "--out",
        &again,
    ]);
    assert_eq!(text, std::fs::read_to_string(&again).unwrap());
}

#[test]
fn infeasible_placement_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = path(dir.path(), "trace.jsonl");
    let o = run(&[
        "envelop",
        "--sphere-d",
        "40",
        "--center",
        "20,10,0",
        "--a-max",
        "10",
        "--steps",
        "5",
        "--out",
        &out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("\"termination\":\"non-converged\""), "{text}");
}

#[test]
fn hand_fk_arity_and_output() {
    let o = run(&["hand-fk", "--q", "0,0,0,0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("expected 5"));

    let q = "0,90deg,0,0";
    let o = run(&[
        "hand-fk", "--q", q, "--q", q, "--q", q, "--q", q, "--q", q, "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["fingers"][1]["name"], "index");
    let tip: Vec<f64> = serde_json::from_value(v["fingers"][1]["fingertip_mm"].clone()).unwrap();
    assert!(
        tip.iter()
            .zip([0.0, 90.0, 30.0])
            .all(|(a, b)| (a - b).abs() < 1e-9),
        "{tip:?}"
    );
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "bad.toml");
    std::fs::write(&cfg, "links_mm = [45.0, -1.0, 20.0]\n").unwrap();
    let o = run(&["ucm-report", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("links_mm[1]"), "{}", stderr(&o));
}
