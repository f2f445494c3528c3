use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn crbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crbm"))
        .args(args)
        .env_remove("CRBM_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc: Value = serde_json::from_slice(&out.stdout).expect("valid json");
    assert_eq!(doc["schema"], "crbm/1");
    doc
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("crbm-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn table1_rows() {
    let out = crbm(&["table1", "--rmax", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let expect = [
        (1, 1, 0, 1),
        (2, 3, 1, 3),
        (3, 20, 4, 6),
        (4, 284, 44, 10),
        (5, 8408, 1144, 15),
    ];
    assert_eq!(rows.len(), 5);
    for (row, (r, f, resets, s)) in rows.iter().zip(expect) {
        assert_eq!(row[0].parse::<u64>().unwrap(), r);
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.5f64.powi(s));
        assert_eq!(row[2].parse::<u64>().unwrap(), f);
        assert_eq!(row[3].parse::<u64>().unwrap(), resets);
        let k: f64 = row[4].parse().unwrap();
        assert_eq!(k, f as f64 * 0.5f64.powi(s));
    }
}

#[test]
fn bounds_budgets() {
    let doc = json(&crbm(&["bounds", "--k", "3", "--n", "2"]));
    let depths = doc["result"]["universal"]["per_depth"].as_array().unwrap();
    assert_eq!(depths[0]["m"], "12");
    assert_eq!(depths[1]["m"], "10");
}

#[test]
fn compile_within_budget_and_deterministic() {
    let args = [
        "compile", "--k", "2", "--n", "1", "--r", "1", "--eps", "0.01", "--seed", "7",
    ];
    let a = crbm(&args);
    let doc = json(&a);
    assert_eq!(doc["result"]["report"]["within_budget"], true);
    assert!(doc["result"]["report"]["achieved_tv"].as_f64().unwrap() <= 0.01);
    let b = crbm(&args);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn compile_modes() {
    for mode in ["universal", "support", "common", "partition"] {
        let doc = json(&crbm(&[
            "compile", "--k", "2", "--n", "2", "--mode", mode, "--seed", "3",
        ]));
        assert_eq!(doc["result"]["report"]["within_budget"], true, "{mode}");
    }
}

#[test]
fn compile_reads_csv_target() {
    let dir = scratch("target");
    let path = dir.join("t.csv");
    std::fs::write(&path, "x,y0,y1\n0,0.25,0.75\n1,0.9,0.1\n").unwrap();
    let doc = json(&crbm(&[
        "compile",
        "--k",
        "1",
        "--n",
        "1",
        "--target",
        path.to_str().unwrap(),
    ]));
    assert_eq!(doc["result"]["report"]["seed"], Value::Null);
    assert_eq!(doc["result"]["params"]["m"], 1);
}

#[test]
fn exit_codes() {
    assert_eq!(crbm(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(crbm(&["pack", "--k", "2"]).status.code(), Some(2));
    let out = crbm(&["pack", "--k", "2", "--r", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    assert_eq!(crbm(&["--help"]).status.code(), Some(0));
}

#[test]
fn output_destinations() {
    let dir = scratch("out");
    let file = dir.join("nested/bounds.json");
    let out = crbm(&[
        "bounds",
        "--k",
        "1",
        "--n",
        "1",
        "--out",
        file.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&file).unwrap()).unwrap();
    assert_eq!(doc["command"], "bounds");

    let env_dir = dir.join("env");
    let out = Command::new(env!("CARGO_BIN_EXE_crbm"))
        .args(["table1", "--rmax", "2"])
        .env("CRBM_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read_to_string(env_dir.join("table1.csv"))
        .unwrap()
        .starts_with("r,"));
}

#[test]
fn mrf_from_files() {
    let dir = scratch("mrf");
    let complex = dir.join("complex.json");
    let theta = dir.join("theta.json");
    std::fs::write(&complex, r#"{"n": 3, "faces": [[0, 1, 2]]}"#).unwrap();
    std::fs::write(
        &theta,
        r#"[{"face": [0, 1], "value": 1.5}, {"face": [0, 1, 2], "value": -0.8}, {"face": [2], "value": 0.3}]"#,
    )
    .unwrap();
    let (c, t) = (complex.to_str().unwrap(), theta.to_str().unwrap());
    let doc = json(&crbm(&["mrf", "--complex", c, "--theta", t]));
    assert_eq!(doc["result"]["params"]["m"], 4);
    assert!(doc["result"]["tv"].as_f64().unwrap() <= 1e-6);
    let doc = json(&crbm(&["mrf", "--complex", c, "--theta", t, "--k", "1"]));
    assert_eq!(doc["result"]["params"]["k"], 1);
    assert!(doc["result"]["row_tv"].as_f64().unwrap() <= 1e-6);

    std::fs::write(&theta, r#"[{"face": [5], "value": 1.0}]"#).unwrap();
    assert_eq!(
        crbm(&["mrf", "--complex", c, "--theta", t]).status.code(),
        Some(1)
    );
}

#[test]
fn ltn_modes() {
    let doc = json(&crbm(&[
        "ltn", "--mode", "parity", "--k", "3", "--eps", "1e-3",
    ]));
    assert_eq!(doc["result"]["embedding"]["params"]["m"], 3);
    assert_eq!(doc["result"]["fixed_point"]["status"], "satisfied");
    let doc = json(&crbm(&[
        "ltn", "--mode", "embed", "--k", "2", "--m", "3", "--n", "2", "--seed", "4",
    ]));
    assert!(doc["result"]["embedding"]["tv"].as_f64().unwrap() <= 1e-3);
    let doc = json(&crbm(&[
        "ltn", "--mode", "sigmoid", "--k", "2", "--seed", "4",
    ]));
    assert_eq!(doc["result"]["fixed_point"], Value::Null);
}

#[test]
fn dim_and_divergence() {
    let doc = json(&crbm(&["dim", "--k", "2", "--n", "2", "--m", "1"]));
    assert_eq!(doc["result"]["numeric"], 7);
    assert_eq!(doc["result"]["agree"], true);
    let doc = json(&crbm(&[
        "divergence",
        "--k",
        "2",
        "--n",
        "2",
        "--m",
        "2",
        "--seed",
        "1",
    ]));
    assert_eq!(doc["result"]["bound"]["value"], 1.0);
    assert_eq!(doc["result"]["witness"]["l"], 1);
}

#[test]
fn verify_all_passes_for_several_seeds() {
    for seed in ["0", "1", "2"] {
        let doc = json(&crbm(&["verify-all", "--seed", seed]));
        let report = &doc["result"];
        assert_eq!(report["all_passed"], true, "seed {seed}: {report}");
        assert_eq!(report["criteria"].as_array().unwrap().len(), 9);
    }
}
