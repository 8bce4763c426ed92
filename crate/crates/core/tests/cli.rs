use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pricedisp")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn solve_then_verify_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("profile.json");
    let path = path.to_str().unwrap();
    let out = run(&["solve", "--structure", "independent:lambda=[0.6,0.5,0.4]", "--out", path]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let ok = run(&["verify", "--structure", "independent:lambda=[0.6,0.5,0.4]", "--profile", path]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = run(&["verify", "--structure", "independent:lambda=[0.7,0.5,0.4]", "--profile", path]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn outputs_are_reproducible() {
    for args in [
        &["solve", "--structure", "binomial:n=3,lambda=0.4"][..],
        &["simulate", "--structure", "binomial:n=2,lambda=0.5", "--consumers", "20000", "--seed", "7", "--cost-hi", "0.1"],
        &["bounds", "--cost", "0.3", "--grid", "11"],
    ] {
        let (a, b) = (run(args), run(args));
        assert_eq!(a.status.code(), Some(0));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn reports_carry_the_expected_values() {
    let out = run(&["passthrough", "--structure", "binomial:n=2,lambda=0.5", "--firm", "1"]);
    let v = json(&out);
    assert_eq!(v["command"], "passthrough");
    let text = v["result"].to_string();
    assert!(text.contains("\"K\":1.5"), "{text}");
    let out = run(&["bounds", "--critical", "--format", "json"]);
    let eta = json(&out)["result"]["eta"].as_f64().unwrap();
    assert!((eta - 4.0 / 3.0).abs() < 1e-6);
    let out = run(&["solve", "--structure", "binomial:n=2,lambda=0.5", "--format", "csv"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("firm,u,mu\n"));
}

#[test]
fn bad_input_exits_with_one() {
    for args in [
        &["solve", "--structure", "binomial:n=2,lambda=1.5"][..],
        &["passthrough", "--structure", "binomial:n=2,lambda=0.5", "--demand", "ces:eta=2", "--cost", "0.1"],
        &["frobnicate"],
        &["solve"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}
