use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_calloss"))
        .args(args)
        .output()
        .expect("spawn calloss")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_out(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json output")
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn bounds_row_for_loglog() {
    let o = run(&[
        "bounds", "--loss", "loglog", "--N", "1e6", "--gamma", "0.1", "--delta", "0.05",
    ]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    let ln_beta: f64 = rows[0][col("ln_beta")].parse().unwrap();
    assert!((ln_beta - 120.897_575_645_496).abs() < 1e-9);
    assert_eq!(rows[0][col("vacuous")], "false");
    assert_eq!(rows[0][col("kind")], "concentration");
}

#[test]
fn bounds_for_several_losses_and_kinds() {
    let o = run(&[
        "bounds",
        "--loss",
        "log,sqlog",
        "--N",
        "1e4",
        "--eps",
        "0.4",
        "--gamma",
        "0.2",
        "--delta",
        "0.05",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let j = json_out(&o);
    assert_eq!(j["rows"].as_array().unwrap().len(), 6);
    assert_eq!(j["config"]["c1"], Value::from(1.0));
}

#[test]
fn bounds_reject_bad_parameters() {
    assert_eq!(
        code(&run(&[
            "bounds", "--N", "1e6", "--gamma", "2", "--delta", "0.05"
        ])),
        1
    );
    assert_eq!(code(&run(&["bounds", "--N", "1e6"])), 1);
    assert_eq!(
        code(&run(&[
            "bounds", "--loss", "linear", "--N", "1e3", "--gamma", ".1", "--delta", ".1"
        ])),
        1
    );
    assert_eq!(
        code(&run(&[
            "bounds", "--loss", "cubic", "--N", "1e3", "--eps", ".1"
        ])),
        1
    );
}

#[test]
fn verify_strict_properness_passes() {
    let o = run(&[
        "verify",
        "--suite",
        "strict-properness",
        "--N",
        "6",
        "--trials",
        "50",
        "--seed",
        "7",
    ]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv_rows(&stdout(&o));
    let passed = header.iter().position(|h| h == "passed").unwrap();
    assert!(rows.iter().all(|r| r[passed] == "true"));
}

#[test]
fn verify_is_seed_deterministic() {
    let args = [
        "verify",
        "--suite",
        "strong-properness,kl-pinsker",
        "--N",
        "5",
        "--trials",
        "30",
        "--seed",
        "3",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn csv_round_trip_reproduces_status() {
    let o = run(&[
        "verify",
        "--suite",
        "mass-bound,l2",
        "--N",
        "5",
        "--trials",
        "20",
        "--l2-max",
        "32",
    ]);
    let (header, rows) = csv_rows(&stdout(&o));
    let passed = header.iter().position(|h| h == "passed").unwrap();
    let violations = header.iter().position(|h| h == "violations").unwrap();
    let all_ok = rows
        .iter()
        .all(|r| r[passed] == "true" && r[violations] == "0");
    assert_eq!(all_ok, code(&o) == 0);
}

#[test]
fn verify_unknown_suite_is_usage_error() {
    let o = run(&["verify", "--suite", "nope"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn invroot_violation_is_reported_with_exit_two() {
    let o = run(&[
        "verify", "--suite", "bregman", "--N", "4", "--trials", "2000",
    ]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("invroot-l1-strong"), "{err}");
}

#[test]
fn logloss_demo_fraction() {
    let o = run(&[
        "demo",
        "--name",
        "logloss-nonconcentration",
        "--N",
        "10000",
        "--m",
        "100",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let j = json_out(&o);
    let rate = j["summary"]["event_rate"].as_f64().unwrap();
    assert!((rate - 0.990).abs() < 0.01);
    assert_eq!(j["rows"].as_array().unwrap().len(), 1000);
}

#[test]
fn linear_demo_reports_exact_probability() {
    let o = run(&[
        "demo",
        "--name",
        "linear-loss-improperness",
        "--trials",
        "200",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let j = json_out(&o);
    let exact = j["summary"]["extra"]["exact_reversal_probability"]
        .as_f64()
        .unwrap();
    assert!(exact > 0.001 && exact < 0.002);
    let strict = run(&[
        "demo",
        "--name",
        "linear-loss-improperness",
        "--trials",
        "200",
        "--min-reversal",
        "0.1",
    ]);
    assert_eq!(code(&strict), 2);
}

#[test]
fn calibrate_single_run_writes_output() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", r#"{"probs": [0.1, 0.2, 0.3, 0.4]}"#);
    let q = write(dir.path(), "q.tsv", "a\t0.25\nb\t0.25\nc\t0.25\nd\t0.25\n");
    let out = dir.path().join("qp.json");
    let o = run(&[
        "calibrate",
        "--p",
        &p,
        "--q",
        &q,
        "--alpha1",
        "0.3",
        "--alpha2",
        "0.1",
        "--delta",
        "0.1",
        "--multiplier",
        "1e-6",
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let j = json_out(&o);
    assert_eq!(j["summary"]["certified"], Value::Bool(true));
    let written = calibrated_losses::io::read_distribution(&out).unwrap();
    assert_eq!(written.len(), 4);
}

#[test]
fn calibrate_refuses_huge_sample_counts() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", r#"{"probs": [0.5, 0.5]}"#);
    let o = run(&[
        "calibrate",
        "--p",
        &p,
        "--q",
        &p,
        "--alpha1",
        "0.3",
        "--alpha2",
        "0.1",
        "--delta",
        "0.1",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn missing_file_is_io_error() {
    let o = run(&[
        "calibrate",
        "--p",
        "/no/such/p.json",
        "--q",
        "/no/such/q.json",
        "--alpha1",
        ".3",
        "--alpha2",
        ".1",
        "--delta",
        ".1",
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn unknown_subcommand_is_usage_error() {
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn concentration_on_random_pair() {
    let o = run(&[
        "concentrate",
        "--loss",
        "loglog",
        "--N",
        "2000",
        "--blocks",
        "8",
        "--m",
        "2000",
        "--trials",
        "200",
        "--gamma",
        "0.1",
        "--delta",
        "0.05",
        "--seed",
        "11",
    ]);
    assert_eq!(code(&o), 0);
    let (_, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 200);
}

#[test]
fn sample_properness_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "p.json",
        r#"{"probs": [0.3333333333333333, 0.6666666666666667]}"#,
    );
    let q = write(dir.path(), "q.json", r#"{"probs": [0.5, 0.5]}"#);
    let o = run(&[
        "sample-proper",
        "--p",
        &p,
        "--q",
        &q,
        "--m",
        "500",
        "--trials",
        "1000",
        "--min-success",
        "0.95",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    assert!(json_out(&o)["summary"]["event_rate"].as_f64().unwrap() >= 0.95);
}

#[test]
fn trigram_table_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let curve = dir.path().join("curve.csv");
    let o = run(&[
        "trigram",
        "--alpha",
        "1,1.4",
        "--samples",
        "3",
        "--seed",
        "2",
        "--curve",
        curve.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let (header, rows) = csv_rows(&stdout(&o));
    assert_eq!(
        header,
        ["model", "alpha", "log", "loglog", "head_mass", "total_mass"]
    );
    assert_eq!(rows.len(), 3);
    let text = std::fs::read_to_string(&curve).unwrap();
    let (ch, crow) = csv_rows(&text);
    assert_eq!(ch, ["rank", "p_cum", "q_cum_alpha_1", "q_cum_alpha_1.4"]);
    assert_eq!(crow.len(), 363);
}

#[test]
fn trigram_with_user_lists() {
    let dir = tempfile::tempdir().unwrap();
    let base = write(dir.path(), "en.tsv", "the\t10\nand\t5\nthen\t3\n");
    let noise = write(dir.path(), "fr.tsv", "été\t1\nle\t1\n");
    let o = run(&[
        "trigram",
        "--base",
        &base,
        "--noise",
        &noise,
        "--noise-mass",
        "0.2",
        "--format",
        "json",
    ]);
    assert_eq!(code(&o), 0);
    let j = json_out(&o);
    assert_eq!(j["summary"]["words"], Value::from(5));
    let bad = write(dir.path(), "bad.tsv", "the 10\n");
    assert_eq!(code(&run(&["trigram", "--base", &bad])), 1);
}

#[test]
fn scoring_pair_and_random() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(dir.path(), "p.json", r#"{"probs": [0.51, 0.49]}"#);
    let q = write(dir.path(), "q.json", r#"{"probs": [0.5, 0.5]}"#);
    let o = run(&["scoring", "--p", &p, "--q", &q, "--format", "json"]);
    assert_eq!(code(&o), 0);
    let rows = json_out(&o)["rows"].as_array().unwrap().clone();
    let invroot = rows.iter().find(|r| r["generator"] == "invroot").unwrap();
    assert!(invroot["divergence"].as_f64().unwrap() < invroot["half_l1_sq"].as_f64().unwrap());
    assert_eq!(code(&run(&["scoring", "--pairs", "500"])), 0);
}
