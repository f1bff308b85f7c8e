use std::path::Path;
use std::process::Command;

fn wavekernel(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_wavekernel"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

#[test]
fn scaling_with_defaults_passes_and_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "").unwrap();
    let out = wavekernel(&["scaling", "--config", "c.toml", "--out", "o", "--threads", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let suite = dir.path().join("o/scaling");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(suite.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["status"], "pass");
    assert_eq!(report["config"]["n"], 4);
    assert_eq!(report["config"]["tolerances"]["scaling"], 1e-9);
    for c in report["suites"][0]["checks"].as_array().unwrap() {
        assert!(c["data"]["max_defect"].as_f64().unwrap() <= 1e-9);
    }
    assert!(suite.join("tables.txt").exists());
    assert!(suite.join("scaling_kernel_scaling.csv").exists());

    let agg = wavekernel(&["report", "--config", "c.toml", "--out", "o"], dir.path());
    assert_eq!(agg.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("o/tables.txt")).unwrap();
    assert!(text.contains("kernel_scaling"));
}

#[test]
fn unsupported_dimension_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "n = 7\n").unwrap();
    let out = wavekernel(&["scaling", "--config", "c.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("`n`") && err.contains("line 1"), "{err}");

    std::fs::write(dir.path().join("ok.toml"), "").unwrap();
    let out = wavekernel(&["scaling", "--config", "ok.toml", "--n", "7"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = wavekernel(&["report", "--config", "ok.toml", "--out", "nothing-here"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kernel_grid_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "checks = [\"kernel_grids\"]\nh = [2.0]\n").unwrap();
    let out = wavekernel(&["kernel-eval", "--config", "c.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(dir.path().join("o/kernel-eval/kernel_eval_kernel_K.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "sigma,t,h,re,im,err");
}

#[test]
fn failing_check_exits_one() {
    // a slope tolerance of 1e-6 cannot be met by a finite-window fit
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "checks = [\"free_decay_slope\"]\n[tolerances]\nslope = 1e-6\n",
    )
    .unwrap();
    let out = wavekernel(&["free-decay", "--config", "c.toml", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stdout));
}
