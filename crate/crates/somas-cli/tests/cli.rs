//! End-to-end tests that drive the compiled binary. The golden files pin
//! the exact bytes of the JSON reports for the bundled scenarios, so any
//! change to the output schema or the report ordering shows up as a diff.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use somas::json::somas_to_json;
use somas::model::ActionId;
use somas::scenarios::two_trains;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_somas"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_env(args: &[&str], key: &str, value: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_somas"))
        .args(args)
        .env(key, value)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Writes per-test scratch files under the system temp dir; names carry
/// the pid so parallel test binaries cannot collide.
fn temp_file(name: &str, contents: &str) -> PathBuf {
    let path = std::env::temp_dir().join(format!("somas-cli-{}-{name}", std::process::id()));
    std::fs::write(&path, contents).expect("write temp file");
    path
}

fn trains_model() -> String {
    fixture("two_trains_model.json").display().to_string()
}

fn community_model_path() -> String {
    fixture("community_model.json").display().to_string()
}

#[test]
fn check_prints_verdict_and_exit_code() {
    let model = trains_model();
    let out = run(&["check", "--model", &model, "--state", "q0", "--formula", "<a1,a2> F passed"]);
    assert_eq!(stdout(&out), "true\n");
    assert_eq!(code(&out), 0);

    for solo in ["<a1> F passed", "<a2> F passed"] {
        let out = run(&["check", "--model", &model, "--state", "q0", "--formula", solo]);
        assert_eq!(stdout(&out), "false\n");
        assert_eq!(code(&out), 1);
    }
}

#[test]
fn check_json_matches_golden_bytes() {
    let model = trains_model();
    let out = run(&[
        "check", "--model", &model, "--state", "q0", "--formula", "<a1,a2> F passed", "--json",
    ]);
    assert_eq!(stdout(&out), include_str!("golden/check_two_trains.json"));
    assert_eq!(code(&out), 0);
}

#[test]
fn community_contribution_report_matches_golden_bytes() {
    let model = community_model_path();
    let out = run(&[
        "fullcontrib",
        "--model",
        &model,
        "--state",
        "q0",
        "--goal",
        "F com({u1,u2},{m1})",
        "--goal",
        "F com({u3,u4},{m3})",
        "--goal",
        "F (com({u1,u2},{m1}) && com({u3,u4},{m3}))",
        "--json",
    ]);
    assert_eq!(stdout(&out), include_str!("golden/fullcontrib_community.json"));
    assert_eq!(code(&out), 0);
}

#[test]
fn validate_accepts_a_clean_model_silently() {
    let path = temp_file("clean.json", &somas_to_json(&two_trains(3, 2)));
    let out = run(&["validate", "--model", path.to_str().unwrap()]);
    assert_eq!(stdout(&out), "");
    assert_eq!(code(&out), 0);
}

#[test]
fn validate_names_agent_and_state_for_unavailable_rule_action() {
    // a2 can only wait at q1; pointing its rule at `go` breaks availability.
    let mut somas = two_trains(3, 2);
    somas.rules[1].gamma[1][0].1 = ActionId(0);
    let path = temp_file("broken.json", &somas_to_json(&somas));
    let out = run(&["validate", "--model", path.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let report = stdout(&out);
    assert!(report.contains("a2") && report.contains("q1"), "got: {report}");
}

#[test]
fn validate_rejects_malformed_json_as_usage_error() {
    let path = temp_file("malformed.json", "{\"agents\": [");
    let out = run(&["validate", "--model", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("malformed"), "got: {}", stderr(&out));
}

#[test]
fn unknown_names_are_usage_errors() {
    let model = trains_model();
    let cases: &[&[&str]] = &[
        &["check", "--model", &model, "--state", "nowhere", "--formula", "true"],
        &["check", "--model", &model, "--state", "q0", "--formula", "<a1> F oops"],
        &["check", "--model", &model, "--state", "q0", "--formula", "<zz> F passed"],
        &["check", "--model", &model, "--state", "q0", "--formula", "(("],
        &["fullcontrib", "--model", &model, "--state", "q0", "--goal", "F passed", "--coalition", "zz"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(code(&out), 2, "args {args:?}, stderr: {}", stderr(&out));
    }
}

#[test]
fn query_file_supplies_state_and_formulas() {
    let model = trains_model();
    let query = temp_file(
        "query.json",
        "{\"state\": \"q3\", \"formulas\": [\"passed\"]}",
    );
    let out = run(&["check", "--model", &model, "--query", query.to_str().unwrap()]);
    assert_eq!(stdout(&out), "true\n");
    assert_eq!(code(&out), 0);

    // An explicit --state overrides the query file's state.
    let out = run(&[
        "check",
        "--model",
        &model,
        "--query",
        query.to_str().unwrap(),
        "--state",
        "q0",
    ]);
    assert_eq!(stdout(&out), "false\n");
    assert_eq!(code(&out), 1);
}

#[test]
fn multiple_formulas_report_one_line_each() {
    let model = trains_model();
    let out = run(&[
        "check",
        "--model",
        &model,
        "--state",
        "q0",
        "--formula",
        "<a1,a2> F passed",
        "--formula",
        "<a1> F passed",
    ]);
    assert_eq!(stdout(&out), "true\t<a1,a2> F passed\nfalse\t<a1> F passed\n");
    assert_eq!(code(&out), 1);
}

#[test]
fn coalition_verdict_gates_the_exit_code() {
    let model = trains_model();
    let out = run(&[
        "fullcontrib", "--model", &model, "--state", "q0", "--goal", "F passed",
        "--coalition", "a1,a2", "--json",
    ]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["full"], serde_json::Value::Bool(true));
    assert_eq!(report["coalition"], serde_json::json!(["a1", "a2"]));

    let out = run(&[
        "fullcontrib", "--model", &model, "--state", "q0", "--goal", "F passed",
        "--coalition", "a1",
    ]);
    assert_eq!(code(&out), 1);
    assert!(stdout(&out).contains("full=false"), "got: {}", stdout(&out));
}

#[test]
fn empty_goal_list_yields_an_empty_report() {
    let model = trains_model();
    let out = run(&["fullcontrib", "--model", &model, "--state", "q0", "--json"]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["entries"], serde_json::json!([]));
    assert_eq!(report["rejections"], serde_json::json!([]));
}

#[test]
fn candidate_cap_env_var_bounds_the_search() {
    let model = community_model_path();
    let args = [
        "fullcontrib",
        "--model",
        &model,
        "--state",
        "q0",
        "--goal",
        "F com({u1,u2},{m1})",
    ];
    let out = run_env(&args, "SOMAS_CANDIDATE_CAP", "1");
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("cap"), "got: {}", stderr(&out));

    let out = run_env(&args, "SOMAS_CANDIDATE_CAP", "banana");
    assert_eq!(code(&out), 2);
}

#[test]
fn graph_exports_dot_with_optional_layer_clusters() {
    let path = temp_file("task.json", "{\"scenario\":\"task_delegation\"}");
    let model = path.to_str().unwrap();

    let out = run(&["graph", "--model", model]);
    assert_eq!(code(&out), 0);
    let dot = stdout(&out);
    assert!(dot.starts_with("digraph dependence {"), "got: {dot}");
    assert!(dot.contains("\"a\" -> \"b\";"), "got: {dot}");

    let out = run(&["graph", "--model", model, "--layers"]);
    assert_eq!(code(&out), 0);
    let dot = stdout(&out);
    assert_eq!(dot.matches("subgraph cluster_layer").count(), 3, "got: {dot}");

    // Restricting to a sub-coalition keeps the export well-formed.
    let out = run(&["graph", "--model", model, "--coalition", "a,b"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("digraph dependence {"));
}

#[test]
fn scenario_stubs_reject_bad_parameters_as_content_errors() {
    let cases = [
        ("unknown.json", "{\"scenario\":\"mystery\"}"),
        ("missing.json", "{\"scenario\":\"two_trains\",\"u1\":3}"),
        ("extra.json", "{\"scenario\":\"task_delegation\",\"u1\":3}"),
        (
            "nomiddles.json",
            "{\"scenario\":\"community\",\"users\":[\"u1\"],\"middles\":[],\
             \"interests\":{},\"initial\":{},\"schedule\":[]}",
        ),
    ];
    for (name, text) in cases {
        let path = temp_file(name, text);
        let out = run(&["validate", "--model", path.to_str().unwrap()]);
        assert_eq!(code(&out), 1, "{name}, stderr: {}", stderr(&out));
    }
}

#[test]
fn fuzz_run_agrees_with_path_enumeration() {
    let out = run(&["fuzz", "--seed", "7", "--models", "15", "--formulas", "4"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).ends_with("0 disagreements\n"), "got: {}", stdout(&out));
}
