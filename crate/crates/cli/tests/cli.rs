//! End-to-end tests of the binary: exit codes, verdict lines, report shape.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn biiso(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biiso"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not json ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

const JORDAN_PAIR: &str = r#"{
    "a": {"kind": "dense", "rows": 2, "cols": 2,
          "entries": [[[1, 0], [1, 0]], [[0, 0], [1, 0]]]},
    "b": {"kind": "dense", "rows": 2, "cols": 2,
          "entries": [[[1, 0], [1, 0]], [[0, 0], [1, 0]]]},
    "metric": {"kind": "dense", "rows": 2, "cols": 2,
               "entries": [[[1, 0], [1, 0]], [[1, 0], [2, 0]]]},
    "m_max": 3
}"#;

#[test]
fn shift_pipeline_check_construct_verify() {
    let dir = tempfile::tempdir().unwrap();
    let gen = biiso(dir.path(), &["gen", "shift", "--preset", "dyadic", "--out", "pair.json"]);
    assert_eq!(exit(&gen), 0, "stderr: {}", stderr_text(&gen));
    assert!(stderr_text(&gen).contains("positive_noninvertible"));

    let check = biiso(dir.path(), &["check", "--pair", "pair.json", "--order", "2"]);
    assert_eq!(exit(&check), 0);
    let report = stdout_json(&check);
    assert_eq!(report["result"]["is_p_biisometric"], true);
    assert_eq!(report["result"]["min_annihilation_order"], 1);
    assert!(stderr_text(&check).starts_with("annihilation order 1"));

    let construct = biiso(dir.path(), &["construct", "--pair", "pair.json", "--n-max", "8"]);
    assert_eq!(exit(&construct), 0);
    let report = stdout_json(&construct);
    assert_eq!(report["result"]["verification"]["pairing_residual"], 0.0);
    assert_eq!(report["result"]["system"]["pairing"], serde_json::json!([1.0, 0.0]));

    let t61 = biiso(dir.path(), &["verify-t61", "--pair", "pair.json"]);
    assert_eq!(exit(&t61), 0);
    assert!(stderr_text(&t61).starts_with("verdict: holds"));
    let report = stdout_json(&t61);
    assert_eq!(report["result"]["branch"]["type"], "sequence_system");
}

#[test]
fn jordan_pair_is_inapplicable_for_the_collapse() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("jordan.json"), JORDAN_PAIR).unwrap();
    let t41 = biiso(dir.path(), &["verify-t41", "--pair", "jordan.json"]);
    assert_eq!(exit(&t41), 2);
    assert!(stderr_text(&t41).starts_with("verdict: inapplicable"));
    let report = stdout_json(&t41);
    assert_eq!(report["result"]["power_bounded_a"]["bounded"], false);
    assert_eq!(
        report["result"]["power_bounded_a"]["witness"]["type"],
        "non_semisimple_unimodular"
    );
}

#[test]
fn defect_identity_residual_is_exact_on_the_jordan_pair() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("jordan.json"), JORDAN_PAIR).unwrap();
    let defect = biiso(
        dir.path(),
        &["defect", "--pair", "jordan.json", "--identity-n", "5"],
    );
    assert_eq!(exit(&defect), 0, "stderr: {}", stderr_text(&defect));
    let report = stdout_json(&defect);
    assert_eq!(report["result"]["vanishes"], true);
    assert_eq!(report["result"]["identity"]["n"], 5);
    assert_eq!(report["result"]["identity"]["residual"], 0.0);
}

#[test]
fn finite_pair_runs_the_similarity_branch() {
    let dir = tempfile::tempdir().unwrap();
    let gen = biiso(
        dir.path(),
        &["gen", "finite", "--dim", "3", "--normal", "--seed", "11", "--out", "fin.json"],
    );
    assert_eq!(exit(&gen), 0, "stderr: {}", stderr_text(&gen));
    assert!(stderr_text(&gen).contains("strictly_positive"));

    let t61 = biiso(dir.path(), &["verify-t61", "--pair", "fin.json"]);
    assert_eq!(exit(&t61), 0, "stderr: {}", stderr_text(&t61));
    assert!(stderr_text(&t61).starts_with("verdict: holds"));
    let report = stdout_json(&t61);
    assert_eq!(report["result"]["branch"]["type"], "unitary_similarity");
    assert_eq!(report["result"]["class_escalation_fired"], true);

    // a dense invertible pair has no adjoint kernel to seed sequences with
    let construct = biiso(dir.path(), &["construct", "--pair", "fin.json"]);
    assert_eq!(exit(&construct), 2);
    let report = stdout_json(&construct);
    assert!(report["error"].is_string());
}

#[test]
fn solve_metric_exit_codes_follow_the_outcome() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("jordan.json"), JORDAN_PAIR).unwrap();
    let found = biiso(dir.path(), &["solve-metric", "--pair", "jordan.json", "--order", "3"]);
    assert_eq!(exit(&found), 0, "stderr: {}", stderr_text(&found));
    let report = stdout_json(&found);
    assert_eq!(report["result"]["outcome"], "found_positive");
    assert_eq!(report["result"]["nullspace_dim"], 4);

    let none = biiso(dir.path(), &["solve-metric", "--pair", "jordan.json", "--order", "1"]);
    assert_eq!(exit(&none), 1);
    let report = stdout_json(&none);
    assert_eq!(report["result"]["outcome"], "no_positive_solution");
}

#[test]
fn classify_op_reports_the_nilpotent_block() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("nil.json"),
        r#"{"kind": "dense", "rows": 2, "cols": 2,
            "entries": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]]}"#,
    )
    .unwrap();
    let out = biiso(dir.path(), &["classify-op", "--operator", "nil.json"]);
    assert_eq!(exit(&out), 0);
    assert!(stderr_text(&out).starts_with("classes: none"));
    let report = stdout_json(&out);
    let w = report["result"]["class"]["numerical_radius"].as_f64().unwrap();
    assert!((w - 0.5).abs() < 1e-6);
    assert_eq!(report["result"]["class"]["flags"]["normaloid"], false);
    assert_eq!(report["result"]["power_bounded"]["bounded"], true);
}

#[test]
fn expand_reconstructs_on_the_dyadic_system() {
    let dir = tempfile::tempdir().unwrap();
    let gen = biiso(dir.path(), &["gen", "shift", "--preset", "dyadic", "--out", "pair.json"]);
    assert_eq!(exit(&gen), 0);
    std::fs::write(
        dir.path().join("x.json"),
        r#"{"entries": [[0, [1, 0]], [1, [1, 0]]]}"#,
    )
    .unwrap();
    let out = biiso(
        dir.path(),
        &["expand", "--pair", "pair.json", "--x", "x.json", "--k-max", "4"],
    );
    assert_eq!(exit(&out), 0, "stderr: {}", stderr_text(&out));
    let report = stdout_json(&out);
    assert_eq!(report["result"]["expansion"]["residual_phi"], 0.0);
    // A maps e_0 + e_1 to e_1 + e_2
    assert_eq!(
        report["result"]["actions"]["a"]["entries"],
        serde_json::json!([[1, [1.0, 0.0]], [2, [1.0, 0.0]]])
    );
}

#[test]
fn bad_input_exits_3_with_a_position() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("broken.json"), "{\"a\": \n}").unwrap();
    let out = biiso(dir.path(), &["check", "--pair", "broken.json"]);
    assert_eq!(exit(&out), 3);
    assert!(stderr_text(&out).contains("line"));
    let report = stdout_json(&out);
    assert!(report["error"].is_string());

    let missing = biiso(dir.path(), &["check", "--pair", "nope.json"]);
    assert_eq!(exit(&missing), 3);

    let usage = biiso(dir.path(), &["check", "--no-such-flag"]);
    assert_eq!(exit(&usage), 3);
}

#[test]
fn help_and_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let help = biiso(dir.path(), &["--help"]);
    assert_eq!(exit(&help), 0);
    assert!(String::from_utf8_lossy(&help.stdout).contains("check"));

    let gen = biiso(dir.path(), &["gen", "shift", "--preset", "constant", "--out", "p.json"]);
    assert_eq!(exit(&gen), 0);
    let check = biiso(
        dir.path(),
        &["check", "--pair", "p.json", "--out", "report.json", "--threads", "2"],
    );
    assert_eq!(exit(&check), 0);
    assert!(check.stdout.is_empty());
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let report: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["tool"]["name"], "biiso");
    assert_eq!(report["result"]["min_annihilation_order"], 1);
}
