//! End-to-end runs of the `qdurr` binary.

use std::process::{Command, Output};

fn qdurr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdurr")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn eval_prints_the_closed_form() {
    let o = qdurr(&["eval", "--q", "0.5", "--f", "monomial:1", "--x", "0.3"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "0.65\n");
}

#[test]
fn representations_agree_from_the_command_line() {
    let out: Vec<String> = ["interval", "entire", "taylor"]
        .iter()
        .map(|rep| stdout(&qdurr(&["eval", "--q", "0.5", "--f", "monomial:2", "--x", "0.25", "--rep", rep])))
        .collect();
    let v: Vec<f64> = out.iter().map(|s| s.trim().parse().unwrap()).collect();
    // D t^2 = 1 - (q + q^2)(1 - x) + q^3 (1 - x)(1 - q x)
    let exact = 1.0 - 0.75 * 0.75 + 0.125 * 0.75 * 0.875;
    assert!(v.iter().all(|x| (x - exact).abs() < 1e-13), "{out:?}");
}

#[test]
fn verify_reports_a_pass_count() {
    let o = qdurr(&["verify", "--suite", "identities", "--q", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 5);
    assert!(text.ends_with("identities: 5/5 checks passed\n"));
}

#[test]
fn bad_q_is_a_usage_error() {
    let o = qdurr(&["eval", "--q", "1.5", "--f", "monomial:1", "--x", "0.3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("q must lie in (0,1)"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn exit_codes() {
    let cases: [(&[&str], i32); 5] = [
        (&["eval", "--q", "0.5", "--f", "frobnicate:1", "--x", "0.3"], 2),
        (&["bogus"], 2),
        (&["eval", "--q", "0.5", "--f", "exp", "--z", "3,1", "--max-terms", "3"], 1),
        (&["eval", "--q", "0.5", "--f", "monomial:1", "--x", "0.3", "--config", "/nonexistent/cfg.json"], 3),
        (&["eval", "--q", "0.5", "--f", "monomial:1", "--x", "0.3", "--out", "/nonexistent/dir/x.txt"], 3),
    ];
    for (args, code) in cases {
        let o = qdurr(args);
        assert_eq!(o.status.code(), Some(code), "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn csv_artifacts_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let o = qdurr(&[
            "taylor", "--q", "0.5", "--f", "sharp:2", "--k-max", "15", "--out", path.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read_to_string(path).unwrap()
    };
    let a = run("a.csv");
    assert_eq!(a, run("b.csv"));
    assert_eq!(a.lines().next(), Some("k,c_k,err_k"));
    assert_eq!(a.lines().count(), 17);
}

#[test]
fn growth_emits_json_lines() {
    let o = qdurr(&[
        "growth", "--q", "0.5", "--f", "exp", "--r-min", "10", "--r-max", "1e4", "--r-points", "5", "--format", "json",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r["y"].as_f64().unwrap() < 0.0));
}

#[test]
fn sharpness_holds_for_the_extremal_family() {
    let o = qdurr(&["sharpness", "--q", "0.5", "--lambda", "2", "--r-points", "12"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("r,y,bound,slack\n"));
}
