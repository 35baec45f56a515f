use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name).to_string_lossy().into_owned()
}

fn gafz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gafz")).args(args).output().expect("run gafz")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn classify_two_atom() {
    let o = gafz(&["classify", "--measure", &data("two_atom.json"), "--a", "-0.05", "--b", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "Quadratic (Thm1:atom)\n");
}

#[test]
fn argument_errors_exit_2() {
    assert_eq!(gafz(&["classify", "--a", "0.1"]).status.code(), Some(2));
    assert_eq!(gafz(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(gafz(&["simulate", "--format", "xml"]).status.code(), Some(2));
    // a ≥ b
    let o = gafz(&["simulate", "--measure", &data("gaussian.json"), "--a", "0.2", "--b", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(gafz(&["--help"]).status.code(), Some(0));
}

#[test]
fn file_errors_exit_3() {
    let o = gafz(&["classify", "--measure", "/definitely/not/here.json", "--a", "-0.1", "--b", "0.1"]);
    assert_eq!(o.status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"atoms": [[0, 1]], "delta": 1}"#).unwrap();
    let o = gafz(&["classify", "--measure", bad.to_str().unwrap(), "--a", "-0.1", "--b", "0.1"]);
    assert_eq!(o.status.code(), Some(3));
    std::fs::write(&bad, "{not json").unwrap();
    let o = gafz(&["classify", "--measure", bad.to_str().unwrap(), "--a", "-0.1", "--b", "0.1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn analytic_writes_report_and_profile() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gauss");
    let o = gafz(&[
        "analytic",
        "--measure",
        &data("gaussian.json"),
        "--a=-0.2",
        "--b=0.2",
        "--kmax=12",
        "--points=5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["regime"], "Linear");
    assert_eq!(report["fired_condition"], "Thm2:condL2");
    assert_eq!(report["k_truncation"], 12);
    assert!(report["L1"].as_f64().unwrap() > 0.0);
    let profile = std::fs::read_to_string(out.join("profile.csv")).unwrap();
    let lines: Vec<&str> = profile.lines().collect();
    assert_eq!(lines[0], "y,L");
    assert_eq!(lines.len(), 6);
    for l in &lines[1..] {
        let v: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 2.0).abs() < 1e-9);
    }
}

#[test]
fn analytic_singular_reports_infinite_l1() {
    let o = gafz(&["analytic", "--measure", &data("singular.json"), "--a=-0.1", "--b=0.1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("\"L1\": \"inf\""), "{text}");
    assert!(text.contains("Thm3:no-density"));
}

#[test]
fn simulate_json_and_compare_from_saved_stats() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.json");
    let o = gafz(&[
        "simulate",
        "--measure",
        &data("two_atom.json"),
        "--a=-0.05",
        "--b=0.05",
        "--T=20",
        "--T=40",
        "--T=80",
        "--reps=400",
        "--seed=9",
        "--format=json",
        "--out",
        stats.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    assert_eq!(v["rows"][0]["T"], 20.0);

    let cmp = |tol: &str| {
        gafz(&["compare", "--measure", &data("two_atom.json"), "--stats", stats.to_str().unwrap(), "--tol", tol])
    };
    let pass = cmp("0.3");
    assert_eq!(pass.status.code(), Some(0), "{}", stdout(&pass));
    let report: serde_json::Value = serde_json::from_str(&stdout(&pass)).unwrap();
    assert_eq!(report["regime"], "Quadratic");
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
    // statistical noise never matches exactly
    assert_eq!(cmp("0").status.code(), Some(1));
    // stats for another window
    let o = gafz(&[
        "compare",
        "--measure",
        &data("two_atom.json"),
        "--stats",
        stats.to_str().unwrap(),
        "--a=-0.1",
        "--b=0.1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("config_mismatch"));
}

#[test]
fn simulate_from_config_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    std::fs::copy(data("gaussian.json"), dir.path().join("m.json")).unwrap();
    std::fs::write(
        &cfg,
        r#"{"measure": "m.json", "a": -0.2, "b": 0.2, "T_list": [5, 10], "replications": 20, "n_modes": 128, "base_seed": 3, "k_max": 8}"#,
    )
    .unwrap();
    let a = gafz(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let text = stdout(&a);
    assert!(text.starts_with("T,mean,var,var_se,reps\n5,"));
    assert!(text.contains(",20\n"));
    let b = gafz(&["simulate", "--config", cfg.to_str().unwrap(), "--reps", "30", "--T", "4"]);
    let text = stdout(&b);
    assert_eq!(text.lines().count(), 2);
    assert!(text.ends_with(",30\n"));
    std::fs::write(&cfg, r#"{"measure": "m.json", "a": -0.2, "b": 0.2, "T_list": [5], "replications": 20, "extra": 1}"#).unwrap();
    assert_eq!(gafz(&["simulate", "--config", cfg.to_str().unwrap()]).status.code(), Some(3));
}

#[test]
fn selftest_passes() {
    let o = gafz(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().all(|l| l.starts_with("PASS ")));
    for name in ["parseval/", "q-properties/", "log-cov/", "clt-decay/"] {
        assert!(text.contains(name), "{name}");
    }
}
