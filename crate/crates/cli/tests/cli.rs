use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn corrkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_corrkit"))
        .args(args)
        .env_remove("CORRKIT_CONFIG")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn wstate_envelope_and_hardy_violation() {
    let out = corrkit(&["wstate"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["command"], "wstate");
    assert_eq!(v["verdict"], true);
    assert!(v["config"]["seed"].is_u64());
    let violation = v["result"]["hardy"]["violation"].as_f64().unwrap();
    let expected = (5.0 / std::f64::consts::SQRT_2 - 3.0) / 6.0;
    assert!((violation - expected).abs() < 1e-12);
    assert!(v["result"]["max_deviation"].as_f64().unwrap() < 1e-12);
}

#[test]
fn single_shot_wstate_is_local() {
    let v = json(&corrkit(&["wstate", "--depth", "1"]));
    assert!(v["result"]["max_chsh"].as_f64().unwrap() <= 2.0 + 1e-10);
    assert_eq!(v["result"]["locality"]["verdict"], "local");
}

#[test]
fn chsh_sandwich() {
    let out = corrkit(&["chsh-bound"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = &json(&out)["result"];
    let target = 2.0 * std::f64::consts::SQRT_2;
    assert!((r["upper_bound"].as_f64().unwrap() - target).abs() < 1e-5);
    assert!(r["seesaw_lower_bound"].as_f64().unwrap() >= target - 1e-6);
}

#[test]
fn pr_box_membership_is_negative() {
    let dir = tempfile::tempdir().unwrap();
    let problem = dir.path().join("problem.json");
    let out = corrkit(&[
        "npa",
        "membership",
        "--preset",
        "pr-box",
        "--problem-out",
        problem.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["verdict"], false);
    assert_eq!(v["result"]["solution"]["status"], "infeasible");
    let written: Value = serde_json::from_str(&fs::read_to_string(problem).unwrap()).unwrap();
    assert_eq!(written["kind"], "membership");
}

#[test]
fn tsirelson_table_is_consistent_but_nonlocal() {
    let out = corrkit(&["npa", "membership", "--preset", "tsirelson-chsh"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let out = corrkit(&["local", "--preset", "tsirelson-chsh"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["result"]["verdict"], "nonlocal");
    let out = corrkit(&["local", "--preset", "uniform"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn table_files_are_read_and_checked() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    fs::write(
        &good,
        r#"{"k": 1, "m": 2, "p": [[[[0.5]], [[0.0]]], [[[0.0]], [[0.5]]]]}"#,
    )
    .unwrap();
    let out = corrkit(&["local", "--table", good.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"p": [[[[0.5, "x"]]]]}"#).unwrap();
    let out = corrkit(&["local", "--table", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("p[0][0][0][1]"), "{}", stderr(&out));
}

#[test]
fn input_errors_exit_2() {
    assert_eq!(corrkit(&["chsh-bound", "--level", "0"]).status.code(), Some(2));
    assert_eq!(corrkit(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(corrkit(&["local"]).status.code(), Some(2));
    assert_eq!(corrkit(&["steer", "--random", "2,2"]).status.code(), Some(2));
    assert_eq!(
        corrkit(&["norm", "estimate", "--element", "a + b", "--radius", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        corrkit(&["local", "--table", "/nonexistent/table.json"]).status.code(),
        Some(2)
    );
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"seed": 17, "sdp_tol": 1e-9}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_corrkit"))
        .args(["hardy"])
        .env("CORRKIT_CONFIG", &cfg)
        .output()
        .unwrap();
    let v = json(&out);
    assert_eq!(v["config"]["seed"], 17);
    assert_eq!(v["config"]["sdp_tol"], 1e-9);
    let out = Command::new(env!("CARGO_BIN_EXE_corrkit"))
        .args(["hardy", "--seed", "3"])
        .env("CORRKIT_CONFIG", &cfg)
        .output()
        .unwrap();
    assert_eq!(json(&out)["config"]["seed"], 3);

    fs::write(&cfg, r#"{"sead": 1}"#).unwrap();
    let out = corrkit(&["hardy", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("sead"));
}

#[test]
fn seeded_runs_are_reproducible() {
    let a = json(&corrkit(&["steer", "--random", "3,2,3", "--seed", "5"]));
    let b = json(&corrkit(&["steer", "--random", "3,2,3", "--seed", "5"]));
    let c = json(&corrkit(&["steer", "--random", "3,2,3", "--seed", "6"]));
    assert_eq!(a, b);
    assert_ne!(a["result"]["data"], c["result"]["data"]);
    assert!(a["result"]["round_trip_deviation"].as_f64().unwrap() < 1e-9);
}

#[test]
fn sequential_and_parallel_agree() {
    let args = ["norm", "scan", "--element", "a + a^-1 + b + b^-1", "--radii", "2,4,6"];
    let par = json(&corrkit(&args));
    let seq = json(&corrkit(&[&args[..], &["--sequential"]].concat()));
    assert_eq!(par["result"]["values"], seq["result"]["values"]);
}

#[test]
fn game_sandwich_and_closed_form() {
    let out = corrkit(&["game", "--random", "2,2,2", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = &json(&out)["result"];
    assert!(r["npa_upper_bound"].as_f64().unwrap() >= r["seesaw_lower_bound"].as_f64().unwrap() - 1e-7);

    let r = json(&corrkit(&["game", "--random", "1,3,2", "--da", "1", "--db", "1"]))["result"].clone();
    let closed = r["closed_form"].as_f64().unwrap();
    assert!((r["npa_upper_bound"].as_f64().unwrap() - closed).abs() < 1e-6);
    assert!((r["seesaw_lower_bound"].as_f64().unwrap() - closed).abs() < 1e-6);
}

#[test]
fn norm_estimates() {
    let r = json(&corrkit(&[
        "norm",
        "estimate",
        "--element",
        "a + a^-1 + b + b^-1",
        "--radius",
        "6",
    ]))["result"]
        .clone();
    let v = r["value"].as_f64().unwrap();
    assert!(v > 3.2 && v <= 12f64.sqrt());
    let out = corrkit(&[
        "norm",
        "estimate",
        "--kind",
        "biregular",
        "--element",
        "a + a^-1 + b + b^-1",
        "--radius",
        "3",
    ]);
    assert!((json(&out)["result"]["value"].as_f64().unwrap() - 4.0).abs() < 1e-9);
    let out = corrkit(&[
        "norm",
        "estimate",
        "--element",
        "a + b",
        "--radius",
        "3",
        "--allow-non-self-adjoint",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}

#[test]
fn free_check_and_dilations() {
    for w in [
        ["--witness", "two-cyclic"],
        ["--witness", "three-z2"],
        ["--witness", "free-in-free"],
    ] {
        let out = corrkit(&["free-check", w[0], w[1], "--max-len", "5"]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        assert!(json(&out)["result"]["report"]["failures"]
            .as_array()
            .unwrap()
            .is_empty());
    }
    assert_eq!(
        corrkit(&["free-check", "--witness", "three-z2", "--orders", "3,3"])
            .status
            .code(),
        Some(2)
    );

    let r = json(&corrkit(&["dilate", "stinespring", "--random", "3,2,2"]))["result"].clone();
    assert!(r["reconstruction_residual"].as_f64().unwrap() < 1e-10);
    let r = json(&corrkit(&["dilate", "naimark", "--random", "2,3"]))["result"].clone();
    assert!(r["dilation"]["residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn table_format_prints_rows() {
    let out = corrkit(&["hardy", "--format", "table"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("violation"));
    assert!(text.lines().last().unwrap().starts_with("verdict"));
}

#[test]
fn documented_invocations() {
    let out = corrkit(&["wstate", "--depth", "2", "--format", "table"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0.284517797") && text.contains("0.048815536"));
    assert!(text.contains("Hardy violation = 0.0892556510"));

    let r = json(&corrkit(&["chsh-bound", "--level", "1ab"]))["result"].clone();
    assert!((r["upper_bound"].as_f64().unwrap() - 2.828427).abs() < 1e-5);

    let out = corrkit(&[
        "free-check",
        "--witness",
        "two-cyclic",
        "--orders",
        "3,3",
        "--max-len",
        "8",
        "--format",
        "table",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let first = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert!(
        first.starts_with("0 failures / ") && first.ends_with(" words"),
        "{first}"
    );
}
