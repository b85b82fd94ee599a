use std::process::Command;

fn irs_sim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_irs-sim"))
}

#[test]
fn run_writes_csv_and_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    std::fs::write(
        &cfg,
        r#"
[system]
m = 6
gamma_db = 3.0

[experiments.tiny]
problem = "power-min"
sweep = "gamma_db"
values = [0.0, 3.0]
trials = 2
schemes = ["proposed", "no_irs"]
"#,
    )
    .unwrap();
    let out = dir.path().join("tiny.csv");
    let status = irs_sim()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--experiment", "tiny", "--out"])
        .arg(&out)
        .args(["--seed", "5"])
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "experiment,seed,trial,sweep_param,sweep_value,scheme,metric,unit");
    assert_eq!(lines.len(), 1 + 2 * 2 * 2);
    assert!(lines[1..].iter().all(|l| l.starts_with("tiny,5,") && l.ends_with(",W")));
    assert!(dir.path().join("tiny.timing.csv").exists());
}

#[test]
fn trials_flag_overrides_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv.csv");
    let status = irs_sim()
        .args(["run", "--experiment", "rate-convergence", "--trials", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("seed,trial,outer_iter,sum_rate_bps_hz,objective_32a\n"));
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0")));
}

#[test]
fn partition_prints_three_bands() {
    let out = irs_sim().arg("partition").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with(['1', '2', '3'])).count(), 3);
}

#[test]
fn validate_passes() {
    let out = irs_sim().arg("validate").output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(!String::from_utf8(out.stdout).unwrap().contains("FAIL"));
}

#[test]
fn unknown_experiment_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = irs_sim()
        .args(["run", "--experiment", "nope", "--out"])
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("unknown experiment"));
}
