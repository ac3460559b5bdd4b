use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_matfreedman"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> (i32, Value) {
    let out = run(args);
    let doc = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap(), doc)
}

fn num(v: &Value) -> f64 {
    v.to_string().parse().unwrap()
}

#[test]
fn bound_examples() {
    let (code, doc) = json(&[
        "bound", "--kind", "freedman", "-t", "1", "--sigma2", "1", "-R", "1", "-d", "1",
    ]);
    assert_eq!(code, 0);
    let row = &doc["rows"][0];
    assert!((num(&row["value"]) - (-0.375f64).exp()).abs() < 1e-15);
    assert!(num(&row["value"]).to_string().starts_with("0.687289"));

    let (_, doc) = json(&[
        "bound", "--kind", "bennett", "-t", "0", "--sigma2", "1", "-R", "1", "-d", "7",
    ]);
    let row = &doc["rows"][0];
    assert_eq!(num(&row["raw"]), 7.0);
    assert_eq!(num(&row["value"]), 1.0);
    assert_eq!(row["clipped"], Value::Bool(true));

    let (_, doc) = json(&[
        "bound",
        "--kind",
        "rectangular",
        "-t",
        "2",
        "--sigma2",
        "4",
        "-R",
        "1",
        "--d1",
        "1",
        "--d2",
        "1",
    ]);
    let raw = num(&doc["rows"][0]["raw"]);
    assert!((raw - 2.0 * (-3.0f64 / 7.0).exp()).abs() < 1e-14);

    let (_, doc) = json(&[
        "bound", "--kind", "master", "-t", "1", "--sigma2", "1", "-d", "1",
    ]);
    let row = &doc["rows"][0];
    assert!((num(&row["theta_star"]) - 2f64.ln()).abs() < 1e-10);
    assert!((num(&row["value"]) - std::f64::consts::E / 4.0).abs() < 1e-10);
}

#[test]
fn invert_round_trips_through_bound() {
    let (code, doc) = json(&[
        "invert", "--delta", "0.01", "--sigma2", "2", "-R", "1", "-d", "3",
    ]);
    assert_eq!(code, 0);
    let t = num(&doc["rows"][0]["t"]);
    let t_arg = format!("{t:e}");
    let (_, doc) = json(&["bound", "-t", &t_arg, "--sigma2", "2", "-d", "3"]);
    assert!((num(&doc["rows"][0]["raw"]) - 0.01).abs() < 1e-12);
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["bound", "-t", "-1", "--sigma2", "1", "-d", "1"][..],
        &["bound", "--kind", "freedman", "-t", "1", "--sigma2", "1"],
        &[
            "bound",
            "--kind",
            "rectangular",
            "-t",
            "1",
            "--sigma2",
            "1",
            "--d1",
            "2",
        ],
        &[
            "bound", "--kind", "nope", "-t", "1", "--sigma2", "1", "-d", "1",
        ],
        &["certify", "--suite", "bogus"],
        &[
            "verify-tail",
            "--kernel",
            "walk1d",
            "--K",
            "4",
            "-t",
            "2",
            "--sigma2",
            "4",
        ],
        &["simulate", "--kernel", "walk1d", "--seed", "1"],
        &[
            "simulate",
            "--kernel",
            "nosuchkernel",
            "--K",
            "3",
            "--seed",
            "1",
        ],
        &[
            "sweep", "--kernel", "walk1d", "--K", "4", "--sigma2", "4", "--seed", "1",
        ],
        &["invert", "--delta", "0", "--sigma2", "1"],
    ] {
        assert_eq!(run(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn verify_tail_examples() {
    let (code, doc) = json(&[
        "verify-tail",
        "--kernel",
        "walk1d",
        "--K",
        "4",
        "-t",
        "2",
        "--sigma2",
        "4",
        "--trials",
        "200000",
        "--seed",
        "7",
    ]);
    assert_eq!(code, 0);
    let row = &doc["rows"][0];
    assert!(num(&row["ci_low"]) <= 0.375 && 0.375 <= num(&row["ci_high"]));
    assert_eq!(row["ok"], Value::Bool(true));
    assert_eq!(doc["meta"]["seed"], serde_json::json!(7));
    assert_eq!(doc["meta"]["command"]["name"], "verify-tail");

    let (code, doc) = json(&[
        "verify-tail",
        "--kernel",
        "statewalk",
        "--K",
        "6",
        "-t",
        "0",
        "--sigma2",
        "1",
        "--trials",
        "100",
        "--seed",
        "1",
    ]);
    assert_eq!(code, 0);
    assert_eq!(num(&doc["rows"][0]["p_hat"]), 1.0);
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn kernel_files() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(
        dir.path(),
        "walk.toml",
        "dim = 1\nhorizon = 4\ncentered = true\n\n[[state]]\nname = \"s\"\n\n[[state.outcome]]\nprob = \"0.5\"\nmatrix = [1]\n\n[[state.outcome]]\nprob = \"0.5\"\nmatrix = [-1]\n",
    );
    let from_file = run(&[
        "verify-tail",
        "--kernel",
        &good,
        "-t",
        "2",
        "--sigma2",
        "4",
        "--trials",
        "5000",
        "--seed",
        "3",
        "--format",
        "csv",
    ]);
    let builtin = run(&[
        "verify-tail",
        "--kernel",
        "walk1d",
        "--K",
        "4",
        "-t",
        "2",
        "--sigma2",
        "4",
        "--trials",
        "5000",
        "--seed",
        "3",
        "--format",
        "csv",
    ]);
    assert_eq!(from_file.status.code(), Some(0));
    assert_eq!(from_file.stdout, builtin.stdout);

    let bad = write(dir.path(), "bad.toml", "dim = 1\nhorizon = 4\n[[state]]\nname = \"s\"\n[[state.outcome]]\nprob = \"0.5\"\nmatrix = [1]\n");
    let out = run(&[
        "verify-tail",
        "--kernel",
        &bad,
        "-t",
        "1",
        "--sigma2",
        "1",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 4, column 8"), "{err}");

    let syntax = write(dir.path(), "syntax.toml", "dim = 1\nhorizon = = 3\n");
    let out = run(&["simulate", "--kernel", &syntax, "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2, column"));
}

#[test]
fn contradicted_bound_exits_1() {
    // a deterministic upward drift is not a martingale, so the bound need not hold
    let dir = tempfile::tempdir().unwrap();
    let drift = write(dir.path(), "drift.toml", "dim = 1\nhorizon = 4\n[[state]]\nname = \"up\"\n[[state.outcome]]\nprob = \"1\"\nmatrix = [1]\n");
    let out = run(&[
        "verify-tail",
        "--kernel",
        &drift,
        "-t",
        "2",
        "--sigma2",
        "4",
        "--trials",
        "1000",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["rows"][0]["ok"], Value::Bool(false));
    assert_eq!(num(&doc["rows"][0]["p_hat"]), 1.0);
}

#[test]
fn certify_examples() {
    let (code, doc) = json(&["certify", "--suite", "h-inequality"]);
    assert_eq!(code, 0);
    assert!(num(&doc["meta"]["summary"][0]["min_margin"]) >= 0.0);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 10_000);

    let (code, doc) = json(&[
        "certify",
        "--suite",
        "lieb",
        "--instances",
        "1000",
        "--seed",
        "1",
    ]);
    assert_eq!(code, 0);
    assert!(doc["rows"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["pass"] == Value::Bool(true)));

    let out = run(&["certify", "--suite", "mgf", "--instances", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("vacuous"));

    let (code, doc) = json(&["certify", "--suite", "supermartingale"]);
    assert_eq!(code, 0);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 12);

    assert_eq!(
        run(&[
            "certify",
            "--suite",
            "supermartingale",
            "--kernel",
            "walk1d",
            "--K",
            "20"
        ])
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn csv_numbers_round_trip() {
    let out = run(&[
        "simulate",
        "--kernel",
        "rademacher2d",
        "--K",
        "6",
        "--theta",
        "0.3,1.7",
        "--seed",
        "11",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "k,state,lambda_max_y,lambda_max_w,s_theta_0.3,s_theta_1.7"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 7);
    for line in rows {
        for field in line.split(',').skip(2) {
            let v: f64 = field.parse().unwrap();
            assert_eq!(format!("{v:.16e}"), field);
        }
    }
}

#[test]
fn output_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.json");
    let args = [
        "sweep",
        "--kernel",
        "statewalk",
        "--K",
        "8",
        "--t-grid",
        "0,1,2",
        "--sigma2",
        "3",
        "--trials",
        "3000",
        "--seed",
        "5",
    ];
    let stdout = run(&args).stdout;
    let mut with_file = args.to_vec();
    with_file.extend(["--output", path.to_str().unwrap()]);
    let out = run(&with_file);
    assert!(out.stdout.is_empty());
    let file: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    let piped: Value = serde_json::from_slice(&stdout).unwrap();
    assert_eq!(file["rows"], piped["rows"]);
}
