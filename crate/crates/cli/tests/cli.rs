//! End-to-end checks of the `slopekit` binary.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slopekit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

#[test]
fn envelope_has_run_parameters() {
    let v = json(&run(&["--p", "5", "--N", "7", "newton", "--series", "1,-1@0,1@1"]));
    for key in ["command", "p", "N", "D", "m", "seed", "certified_precision", "result"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["p"], 5);
    assert_eq!(v["N"], 7);
}

#[test]
fn newton_reports_slopes() {
    let v = json(&run(&["newton", "--series", "1,-1@0,1@1"]));
    let slopes: Vec<&str> = v["result"]["slopes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["slope"].as_str().unwrap())
        .collect();
    assert_eq!(slopes, ["0/1", "1/1"]);
}

#[test]
fn twig_eval_is_normalized_at_the_u_point() {
    let v = json(&run(&["twig-eval", "--example", "bf", "--weights", "2,3,1", "--point", "1,0,1,1"]));
    assert_eq!(v["result"]["value"], 1);
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["newton", "--series", "x"]).status.code(), Some(1));
    assert_eq!(run(&["--N", "4", "riesz", "--matrix", "1,1;3,9", "--h", "1"]).status.code(), Some(2));
}

#[test]
fn selftest_is_byte_identical() {
    let a = run(&["--seed", "7", "selftest", "--no-oms"]);
    let b = run(&["--seed", "7", "selftest", "--no-oms"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
}
