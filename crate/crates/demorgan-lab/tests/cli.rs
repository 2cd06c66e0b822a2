//! End-to-end runs of the `demorgan-lab` binary.

use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_demorgan-lab")).args(args).output().expect("binary runs");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn disjunctive_syllogism_in_etl4_and_bd4() {
    assert_eq!(run(&["check", "--matrix", "ETL4", "--rule", "p, ~p|q |- q"]).0, 0);
    let (code, out, _) = run(&["check", "--matrix", "BD4", "--rule", "p, ~p|q |- q"]);
    assert_eq!(code, 1);
    assert!(out.contains("counterexample: p=b, q=0"), "{out}");
}

#[test]
fn json_output_parses() {
    let (code, out, _) = run(&["--json", "check", "--matrix", "K3", "--rule", "|- p | ~p"]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["valid"], false);
    assert_eq!(v["counterexample"]["p"], "n");
}

#[test]
fn malformed_input_exits_two() {
    let (code, _, err) = run(&["check", "--matrix", "BD5", "--rule", "p |- p"]);
    assert_eq!(code, 2);
    assert!(err.contains("BD5"), "{err}");
    assert_eq!(run(&["check", "--matrix", "BD4", "--rule", "p |-- p"]).0, 2);
    assert_eq!(run(&["color", "K3", "two"]).0, 2);
    assert_eq!(run(&["nonsense"]).0, 2);
}

#[test]
fn graph_commands() {
    assert_eq!(run(&["color", "C5", "3"]).0, 0);
    assert_eq!(run(&["color", "C5", "2"]).0, 1);
    assert_eq!(run(&["weakcolor", "K3", "2"]).0, 0);
    assert_eq!(run(&["weakcolor", "K4", "2"]).0, 1);
    assert_eq!(run(&["hom", "K3", "K2"]).0, 1);
    let (code, out, _) = run(&["classify", "--matrix", "Kminus8"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("<V={"), "{out}");
    let (_, out, _) = run(&["mu", "--plus", "G2"]);
    assert!(out.contains("8 elements"), "{out}");
}

#[test]
fn logic_commands() {
    assert_eq!(run(&["antitheorem", "--logic", "etl", "--formulas", "p", "~p"]).0, 0);
    let (code, out, _) = run(&["antitheorem", "--logic", "LP", "--formulas", "p", "~p"]);
    assert_eq!(code, 1);
    assert!(out.contains("p=b"), "{out}");
    assert_eq!(run(&["logleq", "--from", "BD4", "--to", "K3"]).0, 0);
    assert_eq!(run(&["logleq", "--from", "K3", "--to", "LP3", "--bound", "2"]).0, 1);
    assert_eq!(run(&["witness-kminus", "--premises", "(p&~p)|q", "~q|r", "--conclusion", "r"]).0, 0);
    assert_eq!(run(&["witness-kminus", "--premises", "p|q", "~q|r", "--conclusion", "p|r"]).0, 1);
    let (code, out, _) = run(&["separate", "--hold", "|- p|~p", "--fail", "p, ~p |-", "--pool", "catalog"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("LP3"), "{out}");
    let (code, out, _) = run(&["free", "--gens", "a,b", "--rel", "a<=~a", "b<=~b"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("20 elements"), "{out}");
}

#[test]
fn probe_and_verify() {
    let (code, out, _) = run(&["probe"]);
    assert_eq!(code, 0);
    assert!(out.contains("\"ETL2\" -> \"K\""), "{out}");
    let (code, out, _) = run(&["verify", "--suite", "9"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("PASS  9"), "{out}");
    assert_eq!(run(&["verify", "--suite", "99"]).0, 2);
}
