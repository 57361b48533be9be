use std::path::PathBuf;
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/hospital")
}

fn mdq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdq"))
        .args(args)
        .current_dir(fixtures())
        .env_remove("MDQ_DEPTH_BUDGET")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn query_mark_shifts() {
    let o = mdq(&["query", "hospital.mdq", "--query", "MarkShifts", "--engine", "both"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows, ["2005-09-09"]);
}

#[test]
fn analyze_exit_and_separability() {
    let o = mdq(&["analyze", "hospital.mdq"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("weakly sticky: yes"));
    assert!(stdout(&o).contains("separability: not guaranteed"));
    let o = mdq(&["analyze", "hospital_core.mdq"]);
    assert!(stdout(&o).contains("separability: guaranteed"));
}

#[test]
fn structured_output_is_one_json_document() {
    let o = mdq(&["analyze", "hospital_core.mdq", "--format", "structured"]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["separability"]["verdict"], "guaranteed");
    let o = mdq(&["query", "hospital.mdq", "--query", "ElvisUnit", "--format", "structured"]);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["answers"], serde_json::json!([]));
}

#[test]
fn chase_reports_the_violation() {
    let o = mdq(&["chase", "hospital_core.mdq", "--dump", "none"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("violation intensive_closed: PatientWard(W3, 2005-09-07, TomWaits)"));
    let o = mdq(&["chase", "hospital_core.mdq", "--dump", "facts"]);
    assert!(stdout(&o).contains("Shifts(W1, 2005-09-09, Mark, _:n"));
}

#[test]
fn assess_reports_ratio() {
    let o = mdq(&[
        "assess",
        "hospital_core.mdq",
        "--mapping",
        "mapping.mdq",
        "--quality",
        "quality.mdq",
        "--query",
        "Doctor",
        "--report",
        "structured",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let rel = &doc["report"]["relations"][0];
    assert_eq!(rel["ratio"], serde_json::json!({"numerator": 2, "denominator": 6}));
    assert_eq!(doc["answers"], serde_json::json!([["2005-09-05T12:10", "TomWaits", "38.2"]]));
    assert_eq!(doc["report"]["removed"][0]["rule"], "intensive_closed");
}

#[test]
fn empty_ontology_checks_clean() {
    let dir = std::env::temp_dir().join(format!("mdq-empty-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("empty.mdq");
    std::fs::write(&f, "").unwrap();
    let o = mdq(&["check", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(!stdout(&o).contains("problem"));
}

#[test]
fn usage_and_parse_errors_exit_2() {
    let dir = std::env::temp_dir().join(format!("mdq-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("bad.mdq");
    std::fs::write(&f, "predicate P(x).\ntgd Q(x) <- P(x).\n").unwrap();
    let o = mdq(&["check", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.mdq:2"));
    assert_eq!(mdq(&["query", "hospital.mdq", "--query", "Nope"]).status.code(), Some(2));
    assert_eq!(mdq(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn depth_budget_from_environment() {
    let run = |budget: &str| {
        Command::new(env!("CARGO_BIN_EXE_mdq"))
            .args(["query", "hospital.mdq", "--query", "MarkShifts"])
            .current_dir(fixtures())
            .env("MDQ_DEPTH_BUDGET", budget)
            .output()
            .unwrap()
    };
    let o = run("0");
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("depth budget of 0"));
    assert_eq!(run("5").status.code(), Some(0));
    assert_eq!(run("lots").status.code(), Some(2));
}

#[test]
fn repeated_runs_are_identical() {
    let args: &[&[&str]] = &[
        &["chase", "hospital.mdq", "--dump", "trace"],
        &["query", "hospital.mdq", "--query", "StandardSep5", "--explain"],
        &["analyze", "hospital.mdq", "--format", "structured"],
    ];
    for a in args {
        let (x, y) = (mdq(a), mdq(a));
        assert_eq!(x.stdout, y.stdout, "{a:?}");
        assert_eq!(x.status.code(), y.status.code());
    }
}
