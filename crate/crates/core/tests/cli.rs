//! End-to-end runs of the `witt` binary.

use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;

fn witt(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_witt"));
    cmd.args(args).env_remove("WITT_SIEVE_LIMIT");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn json(args: &[&str], env: &[(&str, &str)]) -> (i32, Value, String) {
    let mut full = vec!["--json"];
    full.extend_from_slice(args);
    let out = witt(&full, env);
    let text = String::from_utf8(out.stdout).unwrap();
    let v = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"));
    (out.status.code().unwrap(), v, text)
}

#[test]
fn height_of_quartic_subfield_of_mu17() {
    let (code, v, _) = json(&["height", "--ext", "mu:n=17;H=[4]", "--p", "2"], &[]);
    assert_eq!(code, 0);
    let r = &v["result"];
    assert_eq!(r["lower"], 2);
    assert_eq!(r["upper"], 2);
    assert_eq!(r["exact"], true);
    assert!(r["special_cap"].is_null());
}

#[test]
fn classify_sqrt_minus_3() {
    let (code, v, _) = json(&["classify", "--chi", "sqrt:-3", "--m", "4"], &[]);
    assert_eq!(code, 0);
    let r = &v["result"];
    assert_eq!(r["overall"]["verdict"], "CaseII");
    let p = &r["primes"][0];
    assert_eq!(p["p"], 2);
    assert_eq!(p["n_p"], 2);
    assert_eq!(p["b_lower"], 1);
    assert_eq!(p["b_upper"], 1);
}

#[test]
fn json_is_canonical_and_deterministic() {
    let args = ["density", "--chi", "sqrt:-3", "--m", "4", "--x", "40", "--samples", "200", "--seed", "7"];
    let (code, v, text) = json(&args, &[]);
    assert_eq!(code, 0);
    assert_eq!(serde_json::to_string_pretty(&v).unwrap(), text.trim_end());
    let (_, _, again) = json(&args, &[]);
    assert_eq!(text, again);
    assert_eq!(v["input"]["seed"], 7);
}

#[test]
fn missing_subcommand_and_bad_input_exit_2() {
    assert_eq!(witt(&[], &[]).status.code(), Some(2));
    assert_eq!(witt(&["height", "--ext", "sqrt:-1", "--p", "2", "--bogus"], &[]).status.code(), Some(2));
    assert_eq!(witt(&["height", "--ext", "cube:5", "--p", "2"], &[]).status.code(), Some(2));
    assert_eq!(witt(&["--help"], &[]).status.code(), Some(0));
}

#[test]
fn selftest_subset_and_negative_control() {
    let (code, v, _) = json(&["selftest", "--only", "heights"], &[]);
    assert_eq!(code, 0);
    let items = v["result"]["items"].as_array().unwrap();
    assert!(!items.is_empty());
    assert!(items.iter().all(|i| i["group"] == "heights" && i["pass"] == true));

    let (code, v, _) = json(&["selftest", "--only", "heights", "--corrupt-bp"], &[]);
    assert_eq!(code, 1);
    let failed: Vec<&str> = v["result"]["items"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|i| i["pass"] == false)
        .map(|i| i["id"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"app-a") && failed.contains(&"app-b"), "{failed:?}");
}

#[test]
fn sieve_limit_precedence() {
    let dir = std::env::temp_dir().join(format!("witt-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("witt.conf");
    writeln!(std::fs::File::create(&cfg).unwrap(), "# test\nsieve_limit = 3000").unwrap();
    let cfg = cfg.to_str().unwrap();
    let base = ["primesets", "--ext", "sqrt:-1", "--p", "2", "--n", "2"];
    let limit = |extra: &[&str], env: &[(&str, &str)]| {
        let mut args = extra.to_vec();
        args.extend_from_slice(&base);
        let (code, v, _) = json(&args, env);
        assert_eq!(code, 0);
        (v["input"]["sieve_limit"].as_u64().unwrap(), v["input"]["sieve_limit_source"].as_str().unwrap().to_string())
    };
    assert_eq!(limit(&[], &[]), (10_000, "default".into()));
    assert_eq!(limit(&["--config", cfg], &[]), (3000, "config".into()));
    assert_eq!(limit(&["--config", cfg], &[("WITT_SIEVE_LIMIT", "2000")]), (2000, "env".into()));
    let mut with_flag = base.to_vec();
    with_flag.extend_from_slice(&["--limit", "1500", "--config", cfg]);
    let (_, v, _) = json(&with_flag, &[("WITT_SIEVE_LIMIT", "2000")]);
    assert_eq!(v["input"]["sieve_limit"], 1500);
    assert_eq!(v["input"]["sieve_limit_source"], "flag");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn metacyclic_small_instance_passes() {
    let (code, v, _) = json(&["metacyclic", "--s", "2", "--t", "3", "--instances", "10"], &[]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["pass"], true);
}
