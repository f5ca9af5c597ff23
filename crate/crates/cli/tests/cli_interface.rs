//! Command-line surface: subcommands, flag overrides, and exit codes
//! (0 success, 2 usage/input error, 3 numerical failure).

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_coherentcast"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("cc-cli-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path) -> PathBuf {
    let cfg = format!(
        "sessions_file={d}/data/sessions.csv\n\
         weather_file={d}/data/weather.csv\n\
         holidays_file={d}/data/holidays.txt\n\
         out_dir={d}/out\n\
         context_length=24\n\
         horizon=24\n\
         lstm_layers=1\n\
         lstm_hidden=4\n\
         picnn_layers=2\n\
         picnn_hidden=4\n\
         batch_size=16\n\
         max_epochs=1\n\
         scenarios=20\n\
         train_scenarios=4\n\
         val_scenarios=4\n\
         seed=3\n\
         split_train_end=2024-01-10T00:00\n\
         split_val_end=2024-01-13T00:00\n",
        d = dir.display()
    );
    let path = dir.join("run.conf");
    std::fs::write(&path, cfg).unwrap();
    path
}

#[test]
fn no_arguments_is_usage_error() {
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_command_is_usage_error() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_sessions_file_exits_2_and_names_the_path() {
    let dir = workdir("missing");
    let cfg = write_config(&dir);
    let out = bin().args(["ingest", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sessions.csv"), "stderr: {stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn empty_sessions_file_reports_no_sessions() {
    let dir = workdir("empty");
    let cfg = write_config(&dir);
    std::fs::create_dir_all(dir.join("data")).unwrap();
    std::fs::write(
        dir.join("data/sessions.csv"),
        "station_id,connect_time,disconnect_time,energy_kwh\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("data/weather.csv"),
        "timestamp,temp_c,dewpoint_c,precip_mm\n2024-01-01T00:00,1,0,0\n",
    )
    .unwrap();
    std::fs::write(dir.join("data/holidays.txt"), "").unwrap();
    let out = bin().args(["ingest", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no sessions"), "stderr: {stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn parse_failure_names_line_number() {
    let dir = workdir("badline");
    let cfg = write_config(&dir);
    std::fs::create_dir_all(dir.join("data")).unwrap();
    std::fs::write(
        dir.join("data/sessions.csv"),
        "station_id,connect_time,disconnect_time,energy_kwh\n\
         s1,2024-01-01T00:00,2024-01-01T02:00,1.0\n\
         s1,not-a-time,2024-01-01T02:00,1.0\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("data/weather.csv"),
        "timestamp,temp_c,dewpoint_c,precip_mm\n2024-01-01T00:00,1,0,0\n",
    )
    .unwrap();
    std::fs::write(dir.join("data/holidays.txt"), "").unwrap();
    let out = bin().args(["ingest", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "stderr: {stderr}");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn zero_scenarios_flag_is_usage_error() {
    let dir = workdir("zeroscen");
    let cfg = write_config(&dir);
    let out = bin()
        .args(["forecast", "--config"])
        .arg(&cfg)
        .args(["--scenarios", "0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn bad_horizon_override_is_usage_error() {
    let dir = workdir("badhor");
    let cfg = write_config(&dir);
    let out = bin()
        .args(["train-base", "--config"])
        .arg(&cfg)
        .args(["--horizon", "36"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn synth_ingest_total_is_row_sum_and_deterministic() {
    let dir = workdir("synthflow");
    let cfg = write_config(&dir);
    let synth = bin()
        .args(["synth-data", "--out"])
        .arg(dir.join("data"))
        .args(["--days", "14", "--seed", "9"])
        .output()
        .unwrap();
    assert_eq!(synth.status.code(), Some(0));

    let out = bin().args(["ingest", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("hourly rows"), "stdout: {stdout}");

    // total column equals the row sum of stations
    let hourly = std::fs::read_to_string(dir.join("out/hourly.csv")).unwrap();
    for line in hourly.lines().skip(1).take(50) {
        let parts: Vec<&str> = line.split(',').collect();
        let values: Vec<f64> = parts[1..].iter().map(|v| v.parse().unwrap()).collect();
        let total = values[values.len() - 1];
        let sum: f64 = values[..values.len() - 1].iter().sum();
        assert!((total - sum).abs() <= 1e-9);
    }

    // repeated ingest produces identical bytes
    let first = std::fs::read(dir.join("out/hourly.csv")).unwrap();
    bin().args(["ingest", "--config"]).arg(&cfg).output().unwrap();
    let second = std::fs::read(dir.join("out/hourly.csv")).unwrap();
    assert_eq!(first, second);
    std::fs::remove_dir_all(&dir).ok();
}
