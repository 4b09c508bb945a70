use std::fs;
use std::path::PathBuf;
use std::process::Command;

fn bench() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ggml-bench"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ggml-bench-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).unwrap();
    dir
}

const CONFIG: &str = r#"{
    "axis": "snr",
    "values": [0, 10],
    "realizations": 2,
    "system": {"n_antennas": 8, "n_rf": 2, "n_users": 2, "snr_db": 10},
    "ggml": {"iterations": 10},
    "algorithms": ["ggml", "zf"]
}"#;

#[test]
fn run_writes_csv_and_resolved_spec() {
    let dir = scratch("run");
    let cfg = dir.join("exp.json");
    fs::write(&cfg, CONFIG).unwrap();
    let out = dir.join("out/result.csv");
    let status = bench()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--seed", "5", "--algos", "zf,pga", "--realizations", "3", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("axis,algorithm,mean_se_bits,std_se,mean_ms,realizations,seed"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.ends_with(",3,5")));
    let echoed = fs::read_to_string(dir.join("out/result.csv.spec.json")).unwrap();
    assert!(echoed.contains("\"lr_digital\"") && echoed.contains("\"calibration_draws\""));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = scratch("bad");
    let cfg = dir.join("exp.json");
    fs::write(&cfg, CONFIG).unwrap();
    let code = |args: &[&str]| bench().args(args).output().unwrap().status.code();
    let cfg = cfg.to_str().unwrap();
    assert_eq!(code(&["run", "--config", cfg, "--algos", "ggml,nope"]), Some(1));
    assert_eq!(code(&["run", "--config", "/nonexistent/exp.json"]), Some(1));
    assert_eq!(code(&["sweep", "--config", cfg, "--realizations", "0"]), Some(1));
    fs::write(dir.join("broken.json"), r#"{"axis": "snr", "values": [10, 0]}"#).unwrap();
    assert_eq!(code(&["run", "--config", dir.join("broken.json").to_str().unwrap()]), Some(1));
}

#[test]
fn selftest_exit_codes() {
    let ok = bench().arg("selftest").output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let text = String::from_utf8(ok.stdout).unwrap();
    assert!(text.contains("metric_gradients") && text.contains("max_residual="));
    let bad = bench().args(["selftest", "--inject-gradient-sign-error"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn trace_and_calibrate_outputs() {
    let dir = scratch("trace");
    let cfg = dir.join("exp.json");
    fs::write(&cfg, CONFIG).unwrap();
    let out = dir.join("trace.csv");
    let status = bench()
        .args(["trace", "--algos", "ggml", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("iter,sum_rate_bits,se_bits,best_se_bits,"));
    assert_eq!(text.lines().count(), 1 + 11);
    assert!(fs::read_to_string(dir.join("trace.csv.json")).unwrap().contains("\"best_iter\""));

    fs::write(
        &cfg,
        r#"{"axis": "delta", "values": [0, 0.2], "realizations": 2,
            "system": {"n_antennas": 8, "n_rf": 2, "n_users": 2, "snr_db": 10},
            "csi": {"calibration_draws": 1000}}"#,
    )
    .unwrap();
    let out = dir.join("eps.csv");
    let status = bench().arg("calibrate").arg("--config").arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 1 + 2 * 2 * 2);
    assert!(fs::read_to_string(dir.join("eps.csv.summary.csv")).unwrap().starts_with("delta,q05,median,q95"));
}
