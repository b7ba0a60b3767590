use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
trials = 3
snr_p_db = [30.0, 40.0]
snr_d_db = [12.0]
[geometry]
m = 64
n = 32
delta_f = 15e3
[channel]
profile = "A"
l_max = 300
paths = 4
k_max = 4
"#;

fn otfs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otfs"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn nmse_sweep_writes_identical_csv_twice() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let a = otfs(&["nmse-sweep", "--config", &cfg]);
    let b = otfs(&["nmse-sweep", "--config", &cfg]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sweep_db,metric,value,trials,errors,seed"));
    assert_eq!(text.lines().filter(|l| l.contains(",nmse,")).count(), 2);
}

#[test]
fn ber_sweep_to_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let csv = dir.path().join("ber.csv");
    let svg = dir.path().join("ber.svg");
    let out = otfs(&[
        "ber-sweep",
        "--config",
        &cfg,
        "--csi",
        "perfect",
        "--csv",
        csv.to_str().unwrap(),
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().any(|l| l.starts_with("12.0,ber,")));
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));
}

#[test]
fn census_reports_both_rates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = otfs(&["refine-census", "--config", &cfg, "--trials", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("refine_doppler_rate")).count(), 2);
    assert_eq!(text.lines().filter(|l| l.contains("refine_delay_rate")).count(), 2);
}

#[test]
fn generated_capture_feeds_the_estimator() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let capture = dir.path().join("rx.bin");
    let gen = otfs(&[
        "gen-channel",
        "--config",
        &cfg,
        "--capture",
        capture.to_str().unwrap(),
        "--snr-p",
        "40",
    ]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let chan = String::from_utf8(gen.stdout).unwrap();
    assert!(chan.contains("\"paths\""));
    assert_eq!(std::fs::metadata(&capture).unwrap().len(), 16 + 64 * 32 * 16);

    let est = otfs(&[
        "estimate-file",
        "--config",
        &cfg,
        "--input",
        capture.to_str().unwrap(),
        "--snr-p",
        "40",
    ]);
    assert!(est.status.success(), "{}", String::from_utf8_lossy(&est.stderr));
    let text = String::from_utf8(est.stdout).unwrap();
    assert!(text.contains("\"mse_trace\""));
    assert!(text.contains("\"source\""));
}

#[test]
fn mismatched_capture_and_bad_config_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let capture = dir.path().join("rx.bin");
    assert!(
        otfs(&["gen-channel", "--config", &cfg, "--capture", capture.to_str().unwrap()])
            .status
            .success()
    );

    let out = otfs(&["estimate-file", "--input", capture.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("config expects 512x128"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "trails = 3\n").unwrap();
    let out = otfs(&["nmse-sweep", "--config", bad.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
