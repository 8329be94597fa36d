//! End-to-end tests of the `bypass` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bypass"))
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("bypass-cli-{}-{name}", std::process::id()));
    p
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary should run");
    assert!(
        out.status.success(),
        "command failed: {:?}\nstderr: {}",
        cmd,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn synth_is_byte_deterministic() {
    let a = tmp("synth-a.csv");
    let b = tmp("synth-b.csv");
    for path in [&a, &b] {
        run_ok(bin().args([
            "synth",
            "--seed",
            "7",
            "--segments",
            "100:0.5,0.4:0.2;100:1.5,-0.2:0.2",
            "--output",
            path.to_str().unwrap(),
        ]));
    }
    let ca = std::fs::read(&a).unwrap();
    let cb = std::fs::read(&b).unwrap();
    std::fs::remove_file(&a).ok();
    std::fs::remove_file(&b).ok();
    assert_eq!(ca, cb);
}

#[test]
fn filter_row_accounting() {
    let series = tmp("rows-in.csv");
    let out = tmp("rows-out.csv");
    let mut content = String::from("t,y\n");
    for i in 0..10 {
        content.push_str(&format!("{i},{}\n", (i as f64) * 0.5 + 1.0));
    }
    std::fs::write(&series, content).unwrap();
    run_ok(bin().args([
        "filter",
        "--model",
        "ada-bypass",
        "--input",
        series.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&out).unwrap();
    std::fs::remove_file(&series).ok();
    std::fs::remove_file(&out).ok();
    let lines: Vec<&str> = text.trim().lines().collect();
    assert_eq!(lines[0], "t,y,m_hat,v_hat,alpha_mean,beta_mean,mu_mean,a,b,epsilon,fp_iters");
    assert_eq!(lines.len(), 1 + 9, "10 inputs must yield 9 prediction rows");
}

#[test]
fn evaluate_emits_comparable_metrics_json() {
    let series = tmp("eval-in.csv");
    run_ok(bin().args([
        "synth",
        "--seed",
        "3",
        "--segments",
        "150:0.3,0.6:0.15;150:2.5,-0.4:0.15",
        "--output",
        series.to_str().unwrap(),
    ]));
    let mut metrics = Vec::new();
    for model in ["skf", "ada-bypass"] {
        let out = run_ok(bin().args([
            "evaluate",
            "--model",
            model,
            "--input",
            series.to_str().unwrap(),
        ]));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        for key in ["rmse", "mad", "mae", "ll", "n"] {
            assert!(v.get(key).is_some(), "model {model} missing key {key}");
        }
        metrics.push(v);
    }
    std::fs::remove_file(&series).ok();
    assert_eq!(metrics[0]["n"], metrics[1]["n"]);
}

#[test]
fn missing_values_and_horizon_forecasts() {
    let series = tmp("missing-in.csv");
    let out = tmp("missing-out.csv");
    let fc = tmp("missing-fc.csv");
    std::fs::write(&series, "t,y\n1,2.0\n2,\n3,4.0\n4,3.5\n").unwrap();
    run_ok(bin().args([
        "filter",
        "--model",
        "bypass",
        "--input",
        series.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
        "--horizon",
        "3",
        "--forecast-out",
        fc.to_str().unwrap(),
    ]));
    let rows = std::fs::read_to_string(&out).unwrap();
    let forecasts = std::fs::read_to_string(&fc).unwrap();
    std::fs::remove_file(&series).ok();
    std::fs::remove_file(&out).ok();
    std::fs::remove_file(&fc).ok();
    // The missing target keeps its row, with an empty y field.
    let missing_row: Vec<&str> = rows.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(missing_row[0], "2");
    assert_eq!(missing_row[1], "");
    assert_eq!(forecasts.trim().lines().count(), 1 + 3);
}

#[test]
fn backtest_runs_on_synth_pair() {
    let x = tmp("bt-x.csv");
    let y = tmp("bt-y.csv");
    run_ok(bin().args([
        "synth",
        "--kind",
        "pair",
        "--seed",
        "11",
        "--n",
        "600",
        "--output-x",
        x.to_str().unwrap(),
        "--output-y",
        y.to_str().unwrap(),
    ]));
    let out = run_ok(bin().args([
        "backtest",
        "--x",
        x.to_str().unwrap(),
        "--y",
        y.to_str().unwrap(),
    ]));
    std::fs::remove_file(&x).ok();
    std::fs::remove_file(&y).ok();
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["sharpe", "max_drawdown", "max_dd_duration_days"] {
        assert!(v.get(key).is_some(), "missing key {key}");
    }
    assert!(v["max_drawdown"].as_f64().unwrap() >= 0.0);
}

#[test]
fn data_errors_exit_1_config_errors_exit_2() {
    // Non-monotone index: data error -> exit 1.
    let series = tmp("err-in.csv");
    std::fs::write(&series, "t,y\n2,1.0\n1,2.0\n").unwrap();
    let out = bin()
        .args([
            "filter",
            "--input",
            series.to_str().unwrap(),
            "--output",
            tmp("err-out.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr should name the line: {stderr}");

    // Unknown model: config error -> exit 2.
    let out = bin()
        .args([
            "filter",
            "--model",
            "nonsense",
            "--input",
            series.to_str().unwrap(),
            "--output",
            tmp("err-out2.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // Bad config file field: exit 2, naming the field.
    let cfg = tmp("err-cfg.json");
    std::fs::write(&cfg, r#"{"beta_zero": 1.0}"#).unwrap();
    let out = bin()
        .args([
            "filter",
            "--config",
            cfg.to_str().unwrap(),
            "--input",
            series.to_str().unwrap(),
            "--output",
            tmp("err-out3.csv").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    std::fs::remove_file(&series).ok();
    std::fs::remove_file(&cfg).ok();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta_zero"));
}

#[test]
fn config_file_with_cli_override() {
    let series = tmp("cfg-in.csv");
    let cfg = tmp("cfg.json");
    let out = tmp("cfg-out.csv");
    std::fs::write(&series, "t,y\n1,1.0\n2,1.5\n3,2.0\n4,2.5\n").unwrap();
    std::fs::write(&cfg, r#"{"model": "skf", "hyper": {"epsilon": 0.5}}"#).unwrap();
    // CLI --model overrides the file's model; the file's epsilon survives.
    run_ok(bin().args([
        "filter",
        "--config",
        cfg.to_str().unwrap(),
        "--model",
        "ada-bypass",
        "--input",
        series.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&out).unwrap();
    std::fs::remove_file(&series).ok();
    std::fs::remove_file(&cfg).ok();
    std::fs::remove_file(&out).ok();
    let first_row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let epsilon: f64 = first_row[9].parse().unwrap();
    assert_eq!(epsilon, 0.5, "epsilon from the config file should apply");
    let fp_iters: usize = first_row[10].parse().unwrap();
    assert!(fp_iters >= 1, "ada-bypass should run fixed-point iterations");
}
