use std::path::Path;
use std::process::{Command, Output};

fn buckid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_buckid")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = buckid(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_then_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let printed = ok(&["simulate", "--case", "2", "--seed", "3", "--out", d]);
    assert!(printed.trim().ends_with("case2.csv"));
    for f in ["case2.csv", "case2_switch.csv", "case2.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }

    let result = dir.path().join("result.json");
    let window = dir.path().join("case2.csv");
    ok(&[
        "estimate",
        "--window",
        window.to_str().unwrap(),
        "--out",
        result.to_str().unwrap(),
    ]);
    let v = json(&result);
    assert!(v["converged"].as_bool().unwrap());
    assert_eq!(v["theta_hat_pct"].as_array().unwrap().len(), 7);
    let l = v["theta_hat_pct"][0].as_f64().unwrap();
    assert!((l - 100.0).abs() < 10.0, "L at {l}%");

    // Without --out the result goes to stdout.
    let stdout = ok(&["estimate", "--window", window.to_str().unwrap()]);
    let again: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(again["theta_hat"], v["theta_hat"]);
}

#[test]
fn invalid_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    for args in [
        vec!["simulate", "--case", "9", "--out", d],
        vec!["landscape", "--case", "1", "--param", "Q", "--out", d],
        vec!["landscape", "--case", "1", "--grid", "150:50:11", "--out", d],
        vec!["experiment", "--cases", "0", "--out", d],
        vec!["estimate", "--window", "/nonexistent/window.csv"],
        vec!["report", "--in", d],
    ] {
        let out = buckid(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn landscape_experiment_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();

    let text = ok(&[
        "landscape",
        "--case",
        "1",
        "--param",
        "L",
        "--grid",
        "80:120:21",
        "--out",
        d,
    ]);
    assert!(text.contains("condition number"));
    let csv = std::fs::read_to_string(dir.path().join("sweeps_case1.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("param,grid_pct,loss"));
    assert_eq!(lines.count(), 21);
    let hessian = json(&dir.path().join("hessian_case1.json"));
    assert_eq!(hessian.as_array().unwrap().len(), 9);
    // One parameter is not enough to classify.
    assert!(!dir.path().join("classification.json").exists());

    let text = ok(&["experiment", "--cases", "1,4", "--reps", "2", "--out", d]);
    assert!(text.contains("case 4:"));
    let summary = json(&dir.path().join("summary.json"));
    assert_eq!(summary["cases"].as_array().unwrap().len(), 2);
    let runs = json(&dir.path().join("results_case4.json"));
    assert_eq!(runs["runs"].as_array().unwrap().len(), 2);

    std::fs::remove_file(dir.path().join("report.md")).unwrap();
    let report = ok(&["report", "--in", d]);
    assert!(dir.path().join("report.md").exists());
    assert!(report.contains("| 4 | 2/2 |"));
    assert!(report.contains("this method (published)"));
}

#[test]
fn landscape_all_params_classifies() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let text = ok(&[
        "landscape",
        "--case",
        "1-2",
        "--grid",
        "50:150:21",
        "--no-hessian",
        "--out",
        d,
    ]);
    assert!(text.contains("L: "));
    let classes = json(&dir.path().join("classification.json"));
    assert_eq!(classes.as_object().unwrap().len(), 7);
    assert!(!dir.path().join("hessian_case1.json").exists());
}
